"""
Semidiscretization f̂(u), the implicit-Euler function g, and the linear operator form (I - αA).

Internally states are raw arrays: shape (m,) for scalar 1D problems and
(mx, my, q) for systems in 2D. StateField wraps them at module boundaries.

Two scalings of the linear-system form are supported:
  per_dx:   f̂_i = F_{i+1/2} - F_{i-1/2},          α = -Δt/Δx
  per_cell: f̂_i = (F_{i+1/2} - F_{i-1/2}) / Δx,   α = -Δt
Both describe the same implicit Euler step u - αf̂(u) = u^n.
"""

from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from app.conserva_errors import ConservaError, GridMismatchError
from app.flux import NumericalFlux
from app.grid_state import Grid1D, Grid2D, StateField
from app.linear_solvers import LinearSystem, restrict

Scaling = Literal["per_dx", "per_cell"]


class SemiDiscretization:
    """Periodic 1D finite-volume scheme for a scalar law"""

    def __init__(self, grid: Grid1D, flux: NumericalFlux):
        self.grid = grid
        self.flux = flux
        self.q = 1

    def raw(self, u: StateField) -> np.ndarray:
        if u.grid != self.grid:
            raise GridMismatchError("state lives on a different grid than the semidiscretization")
        return np.array(u.scalar)

    def field(self, values: np.ndarray) -> StateField:
        return StateField(self.grid, values)

    def interface_fluxes(self, u: np.ndarray) -> Tuple[np.ndarray, ...]:
        return (self.flux.interface_fluxes(u),)

    def flux_difference(self, fluxes: Sequence[np.ndarray]) -> np.ndarray:
        """F_{i+1/2} - F_{i-1/2} (not divided by Δx)"""
        (F,) = fluxes
        return F - np.roll(F, 1)

    def divergence(self, fluxes: Sequence[np.ndarray]) -> np.ndarray:
        return self.flux_difference(fluxes) / self.grid.dx

    def rhs_raw(self, u: np.ndarray) -> np.ndarray:
        return -self.divergence(self.interface_fluxes(u))

    def rhs(self, u: StateField) -> StateField:
        """-(f̂_{i+1/2} - f̂_{i-1/2})/Δx"""
        return self.field(self.rhs_raw(self.raw(u)))

    def flux_difference_jacobian(self, u: np.ndarray, sparse: bool = False):
        """∂(F_{i+1/2} - F_{i-1/2})/∂u_j, dense by default or as a CSC matrix"""
        if self.flux.derivatives is None:
            raise ConservaError(f"Flux '{self.flux.name}' has no derivative rule, Jacobian unavailable")
        m = self.grid.m
        rows = np.arange(m)
        partials = self.flux.derivatives(*self.flux.stencil(u))
        entries_i, entries_j, values = [], [], []
        for r, d_r in zip(self.flux.offsets, partials):
            d_r = np.broadcast_to(d_r, (m,))
            entries_i += [rows, rows]
            entries_j += [(rows + r) % m, (rows - 1 + r) % m]
            values += [d_r, -np.roll(d_r, 1)]
        # duplicate entries are summed
        data = np.concatenate(values).astype(float)
        D = sp.coo_matrix((data, (np.concatenate(entries_i), np.concatenate(entries_j))), shape=(m, m))
        return D.tocsc() if sparse else D.toarray()

    def coarsened(self) -> "SemiDiscretization":
        return SemiDiscretization(self.grid.coarsen(), self.flux)


class SemiDiscretization2D:
    """Periodic 2D finite-volume scheme for systems, one numerical flux per direction"""

    def __init__(self, grid: Grid2D, flux_x: NumericalFlux, flux_y: NumericalFlux, q: int,
                 component_names: Optional[Sequence[str]] = None):
        self.grid = grid
        self.flux_x = flux_x
        self.flux_y = flux_y
        self.q = q
        self.component_names = tuple(component_names) if component_names else None

    def raw(self, u: StateField) -> np.ndarray:
        if u.grid != self.grid or u.q != self.q:
            raise GridMismatchError("state does not match the 2D semidiscretization")
        return np.array(u.values)

    def field(self, values: np.ndarray) -> StateField:
        return StateField(self.grid, values, self.component_names)

    def interface_fluxes(self, u: np.ndarray) -> Tuple[np.ndarray, ...]:
        return self.flux_x.interface_fluxes(u, axis=0), self.flux_y.interface_fluxes(u, axis=1)

    def divergence(self, fluxes: Sequence[np.ndarray]) -> np.ndarray:
        Fx, Fy = fluxes
        return (Fx - np.roll(Fx, 1, axis=0)) / self.grid.dx + (Fy - np.roll(Fy, 1, axis=1)) / self.grid.dy

    def rhs_raw(self, u: np.ndarray) -> np.ndarray:
        return -self.divergence(self.interface_fluxes(u))

    def rhs(self, u: StateField) -> StateField:
        return self.field(self.rhs_raw(self.raw(u)))


@dataclass
class ImplicitEulerSystem:
    """u - αf̂(u) = u^n for one physical step of size dt"""
    semi: object
    dt: float
    u_prev: np.ndarray
    scaling: Scaling = "per_dx"
    pinned: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.u_prev = np.array(self.u_prev, dtype=float)
        if self.dt <= 0:
            raise ConservaError(f"time step must be positive, got {self.dt}")

    @property
    def grid(self):
        return self.semi.grid

    @property
    def alpha(self) -> float:
        return -self.dt / self.grid.dx if self.scaling == "per_dx" else -self.dt

    def fhat(self, u: np.ndarray) -> np.ndarray:
        diff = self.semi.flux_difference(self.semi.interface_fluxes(u))
        return diff if self.scaling == "per_dx" else diff / self.grid.dx

    def g_from_fluxes(self, u: np.ndarray, fluxes: Sequence[np.ndarray]) -> np.ndarray:
        g = (u - self.u_prev) / self.dt + self.semi.divergence(fluxes)
        # pinned cells are boundary data, not unknowns
        for index in self.pinned:
            g[index] = 0.0
        return g

    def g(self, u: np.ndarray) -> np.ndarray:
        """g_i = (u_i - u_i^n)/Δt + (f̂_{i+1/2} - f̂_{i-1/2})/Δx"""
        return self.g_from_fluxes(u, self.semi.interface_fluxes(u))

    def g_eval(self, u: StateField) -> StateField:
        return self.semi.field(self.g(self.semi.raw(u)))

    def newton_rhs(self, u: np.ndarray) -> np.ndarray:
        """u^n - u + αf̂(u); a pinned row asks for value - u_i instead"""
        rhs = self.u_prev - u + self.alpha * self.fhat(u)
        for index, value in self.pinned.items():
            rhs[index] = value - u[index]
        return rhs

    def boundary_mass(self, u: np.ndarray) -> float:
        """Right-hand side mass the pinned rows add on top of mass(u^n) - mass(u)"""
        if not self.pinned:
            return 0.0
        fhat = self.fhat(u)
        volumes = self.grid.volumes
        return float(sum(volumes[i] * (value - self.u_prev[i] - self.alpha * fhat[i])
                         for i, value in self.pinned.items()))

    def operator(self, u: np.ndarray) -> np.ndarray:
        """A = f̂'(u) in this system's scaling, with zero rows at pinned cells"""
        D = self.semi.flux_difference_jacobian(u)
        A = D if self.scaling == "per_dx" else D / self.grid.dx
        if self.pinned:
            A[list(self.pinned)] = 0.0
        return A

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """Newton matrix I - αf̂'(u)"""
        return np.eye(self.grid.m) - self.alpha * self.operator(u)

    def sparse_jacobian(self, u: np.ndarray) -> sp.csc_matrix:
        """I - αf̂'(u) in CSC form for grids beyond the dense limit"""
        A = self.semi.flux_difference_jacobian(u, sparse=True)
        if self.scaling == "per_cell":
            A = A / self.grid.dx
        if self.pinned:
            keep = np.ones(self.grid.m)
            keep[list(self.pinned)] = 0.0
            A = sp.diags(keep) @ A
        return sp.csc_matrix(sp.identity(self.grid.m) - self.alpha * A)

    def linear_system(self, u: np.ndarray) -> LinearSystem:
        """(I - αf̂'(u)) Δu = u^n - u + αf̂(u)"""
        return LinearSystem(self.operator(u), self.alpha, self.newton_rhs(u), self.grid.volumes)

    def coarse_matrix(self, u: np.ndarray) -> np.ndarray:
        """Same discretization rebuilt on the agglomerated grid at the restricted state"""
        coarse = ImplicitEulerSystem(self.semi.coarsened(), self.dt, restrict(self.u_prev), self.scaling)
        return coarse.jacobian(restrict(u))

    def apply_constraints(self, u: np.ndarray) -> np.ndarray:
        for index, value in self.pinned.items():
            u[index] = value
        return u


def explicit_rk_step(semi, u: np.ndarray, dt: float, tableau) -> np.ndarray:
    """One physical-time explicit RK step of u' = -div F(u)"""
    stages = []
    for j in range(tableau.s):
        U = u + dt * sum(tableau.A[j, l] * stages[l] for l in range(j)) if j else u
        stages.append(semi.rhs_raw(U))
    return u + dt * sum(b_j * k_j for b_j, k_j in zip(tableau.b, stages))
