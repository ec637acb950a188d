"""
Newton's method for the implicit-Euler system with a pluggable inner linear solver.

    (I - αf̂'(u_k)) Δu = u^n - u_k + αf̂(u_k),   u_{k+1} = u_k + Δu

No damping or line search. The mass of the right-hand side telescopes to
mass(u^n) - mass(u_k), so only the inner solve of the last outer iteration
can leave a mass error behind; jacobi and gauss_seidel do, the others do not.
Pinned cells get identity rows; their inflow is added to the expected mass.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.conserva_errors import ConservaError
from app.grid_state import StateField
from app.linear_solvers import (
    IterationTrace, LinearSystem, agglomeration_operators, cgc, gauss_seidel, gmres, jacobi, richardson,
    solve_direct,
)
from app.pseudo_time import BUILTIN_TABLEAUS, ButcherTableau, pseudo_iterate
from app.semidisc import ImplicitEulerSystem
from app.telemetry import auto_instrument

InnerMethod = Literal["exact", "richardson", "jacobi", "gauss_seidel", "gmres", "cgc", "pseudo"]


class NewtonConfig(BaseModel):
    """Outer iteration count and the inner solver applied to each Newton system.

    inner_initial "zero" starts the inner solver from Δu = 0; "previous" starts
    it from u^n - u_k, the increment that returns the iterate to the previous
    physical state. The pseudo inner solver marches the linear system in
    pseudo time with tableau and step dtau (Δt = 1 form), one step per inner
    iteration.
    """
    outer: int = Field(default=1, ge=1)
    inner: InnerMethod = "exact"
    inner_iterations: int = Field(default=1, ge=1)
    inner_initial: Literal["zero", "previous"] = "zero"
    theta: float = 0.5
    tableau: str = "heun"
    dtau: float = Field(default=0.5, gt=0)
    gmres_breakdown_tol: float = Field(default=1e-14, gt=0)


class NewtonTrace(IterationTrace):
    inner: List[IterationTrace] = Field(default_factory=list)
    rhs_mass: List[float] = Field(default_factory=list)


def _inner_solve(sys: ImplicitEulerSystem, u: np.ndarray, linear: LinearSystem, x0: np.ndarray,
                 cfg: NewtonConfig, tableau: Optional[ButcherTableau]) -> Tuple[np.ndarray, IterationTrace]:
    k = cfg.inner_iterations
    if cfg.inner == "exact":
        x = solve_direct(linear)
        trace = IterationTrace(method="exact")
        trace.record(linear.norm(linear.residual(x)), linear.mass(x) - linear.mass(linear.b))
        return x, trace
    if cfg.inner == "richardson":
        return richardson(linear, cfg.theta, x0, k)
    if cfg.inner == "jacobi":
        return jacobi(linear, x0, k)
    if cfg.inner == "gauss_seidel":
        return gauss_seidel(linear, x0, k)
    if cfg.inner == "gmres":
        return gmres(linear, x0, min(k, linear.size), cfg.gmres_breakdown_tol)
    if cfg.inner == "pseudo":
        tab = tableau or BUILTIN_TABLEAUS[cfg.tableau.lower()]
        return pseudo_iterate(linear.as_pseudo_problem(1.0), tab, [cfg.dtau] * k, x0)
    R, P = agglomeration_operators(linear.size)
    return cgc(linear, x0, R, P, sys.coarse_matrix(u), k)


def newton_iterate(sys: ImplicitEulerSystem, u0: np.ndarray, cfg: NewtonConfig,
                   tableau: Optional[ButcherTableau] = None) -> Tuple[np.ndarray, NewtonTrace]:
    """Raw-array Newton loop used by the experiment drivers"""
    volumes = sys.grid.volumes
    mass_prev = float(np.sum(volumes * sys.u_prev))
    u = np.array(u0, dtype=float)
    trace = NewtonTrace(method=f"newton/{cfg.inner}")

    def norm(v):
        return float(np.sqrt(np.sum(volumes * v * v)))

    trace.record(norm(sys.newton_rhs(u)), float(np.sum(volumes * u)) - mass_prev)
    for _ in range(cfg.outer):
        linear = sys.linear_system(u)
        rhs_mass = linear.mass(linear.b)
        expected = mass_prev - linear.mass(u) + sys.boundary_mass(u)
        # tolerance relative to the magnitude of the summed terms
        scale = float(np.sum(volumes * (np.abs(sys.u_prev) + np.abs(u) + np.abs(sys.alpha * sys.fhat(u)))))
        if abs(rhs_mass - expected) > 1e-11 * (1.0 + scale):
            raise ConservaError(f"Newton right-hand side mass {rhs_mass:.3e} differs from {expected:.3e}; "
                                "the discretization is not conservative")
        x0 = np.zeros(u.size) if cfg.inner_initial == "zero" else sys.u_prev - u
        du, inner = _inner_solve(sys, u, linear, x0, cfg, tableau)
        u = sys.apply_constraints(u + du)
        trace.inner.append(inner)
        trace.rhs_mass.append(rhs_mass)
        sweeps = inner.predicted_error[1:]
        predicted = float(sum(sweeps)) if sweeps and all(np.isfinite(sweeps)) else float("nan")
        trace.record(norm(sys.newton_rhs(u)), float(np.sum(volumes * u)) - mass_prev, predicted)
        if not np.all(np.isfinite(u)):
            break
    return u, trace


@auto_instrument("newton")
def newton_solve(sys: ImplicitEulerSystem, u0: Optional[StateField], cfg: NewtonConfig,
                 tableau: Optional[ButcherTableau] = None) -> Tuple[StateField, NewtonTrace]:
    """Newton iterations from u0 (default u^n); returns the final iterate and the outer trace"""
    start = sys.u_prev if u0 is None else sys.semi.raw(u0)
    u, trace = newton_iterate(sys, start, cfg, tableau)
    return sys.semi.field(u), trace
