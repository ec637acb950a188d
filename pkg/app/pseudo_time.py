"""
Explicit Runge-Kutta pseudo-time iterations for the implicit-Euler system.

One pseudo step of size Δτ_k = μ_k Δt on u' = -g(u):

    U_j      = u^{(k)} - Δτ_k Σ_{l<j} a_jl g(U_l)
    u^{(k+1)} = u^{(k)} - Δτ_k Σ_j b_j g(U_j)

Truncating after N steps started from u^n is equivalent to a conservative
scheme whose interface flux ĥ is a weighted sum of the stage fluxes, and which
is consistent with c·f where c = 1 - Π_k φ(-μ_k) (the modification constant).
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as scla
from scipy import optimize

from app.conserva_errors import NoRealRootError, ScheduleError, TableauError
from app.grid_state import StateField
from app.linear_solvers import IterationTrace
from app.telemetry import auto_instrument


@dataclass(frozen=True)
class ButcherTableau:
    """Explicit RK coefficients (A strictly lower triangular, Σb = 1)"""
    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        s = b.size
        if A.shape != (s, s):
            raise TableauError(f"Tableau '{self.name}': A has shape {A.shape}, expected ({s}, {s})")
        if c.size != s:
            raise TableauError(f"Tableau '{self.name}': c has {c.size} entries, expected {s}")
        if np.any(np.triu(A) != 0.0):
            raise TableauError(f"Tableau '{self.name}' is not explicit: A has entries on or above the diagonal")
        if abs(float(np.sum(b)) - 1.0) > 1e-12:
            raise TableauError(f"Tableau '{self.name}' is not consistent: sum(b) = {np.sum(b):.15g}")
        for name, arr in (("A", A), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def s(self) -> int:
        return self.b.size


EULER = ButcherTableau("euler", [[0.0]], [1.0], [0.0])
HEUN = ButcherTableau("heun", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5], [0.0, 1.0])
SSPRK3 = ButcherTableau(
    "ssprk3",
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.25, 0.25, 0.0]],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    [0.0, 1.0, 0.5],
)
BUILTIN_TABLEAUS = {tab.name: tab for tab in (EULER, HEUN, SSPRK3)}


def stability_function(tab: ButcherTableau, z: Union[float, complex]) -> Union[float, complex]:
    """φ(z) = 1 + z bᵀ(I - zA)⁻¹1 by forward substitution"""
    k: List[Union[float, complex]] = []
    for j in range(tab.s):
        k.append(1.0 + z * sum(tab.A[j, l] * k[l] for l in range(j)))
    value = 1.0 + z * sum(b_j * k_j for b_j, k_j in zip(tab.b, k))
    return complex(value) if isinstance(value, (complex, np.complexfloating)) else float(value)


def modification_constant(tab: ButcherTableau, mus: Sequence[float]) -> float:
    """c = 1 - Π_l φ(-μ_l)"""
    if len(mus) == 0:
        raise ScheduleError("modification constant of an empty schedule")
    product = 1.0
    for mu in mus:
        product *= stability_function(tab, -mu)
    return float(1.0 - product)


def _check_mus(mus: Sequence[float]) -> List[float]:
    values = [float(mu) for mu in mus]
    for k, mu in enumerate(values):
        if not (mu > 0.0 and math.isfinite(mu)):
            raise ScheduleError(f"mu_{k} = {mu} is not a positive finite number")
    return values


@dataclass
class PseudoSchedule:
    """Ordered step ratios μ_k = Δτ_k/Δt for one tableau"""
    tableau: ButcherTableau
    mus: List[float]

    def __post_init__(self):
        self.mus = _check_mus(self.mus)
        if not self.mus:
            raise ScheduleError("a pseudo-time schedule needs at least one step")

    @property
    def N(self) -> int:
        return len(self.mus)

    @property
    def c(self) -> float:
        return modification_constant(self.tableau, self.mus)

    @property
    def pseudo_time_reached(self) -> float:
        """Σμ_k, the pseudo time reached in units of Δt"""
        return float(math.fsum(self.mus))

    def append(self, mu: float) -> None:
        self.mus.extend(_check_mus([mu]))

    def extend(self, mus: Sequence[float]) -> None:
        self.mus.extend(_check_mus(mus))

    def __iter__(self):
        return iter(self.mus)

    def __len__(self) -> int:
        return len(self.mus)


@dataclass
class StageBlock:
    """Stage values U_j and stage interface fluxes of one pseudo step"""
    mu: float
    values: List[np.ndarray] = field(default_factory=list)
    fluxes: List[Tuple[np.ndarray, ...]] = field(default_factory=list)


def erk_pseudo_step(u: np.ndarray, sys, tab: ButcherTableau, dtau: float,
                    record: Optional[StageBlock] = None) -> np.ndarray:
    """u - Δτ Σ_j b_j g(U_j) with stages built in order"""
    g_stages: List[np.ndarray] = []
    for j in range(tab.s):
        U = u
        for l in range(j):
            if tab.A[j, l] != 0.0:
                U = U - dtau * tab.A[j, l] * g_stages[l]
        if j:
            U = sys.apply_constraints(np.array(U))
        if record is not None:
            fluxes = sys.semi.interface_fluxes(U)
            record.values.append(U)
            record.fluxes.append(fluxes)
            g_stages.append(sys.g_from_fluxes(U, fluxes))
        else:
            g_stages.append(sys.g(U))

    increment = tab.b[0] * g_stages[0]
    for j in range(1, tab.s):
        increment = increment + tab.b[j] * g_stages[j]
    return sys.apply_constraints(u - dtau * increment)


def _weighted_norm(v: np.ndarray, volumes: np.ndarray) -> float:
    if v.ndim > volumes.ndim:
        volumes = volumes[..., np.newaxis]
    return float(np.sqrt(np.sum(volumes * v * v)))


def _mass(v: np.ndarray, volumes: np.ndarray) -> float:
    if v.ndim > volumes.ndim:
        volumes = volumes[..., np.newaxis]
    return float(np.sum(volumes * v))


def _schedule_mus(schedule: Union[PseudoSchedule, Sequence[float]]) -> List[float]:
    return list(schedule.mus) if isinstance(schedule, PseudoSchedule) else _check_mus(schedule)


def pseudo_iterate(sys, tab: ButcherTableau, schedule: Union[PseudoSchedule, Sequence[float]],
                   u0: Optional[np.ndarray] = None,
                   stages: Optional[List[StageBlock]] = None) -> Tuple[np.ndarray, IterationTrace]:
    """Raw-array pseudo-time loop; works for implicit-Euler and linear pseudo problems alike.

    The trace holds the relative residual ||g(u^(k))|| / ||g(u^(0))|| and
    mass(u^(k)) - mass(u^n). Passing a list as stages records every stage block.
    """
    mus = _schedule_mus(schedule)
    volumes = sys.volumes if hasattr(sys, "volumes") else sys.grid.volumes
    u = np.array(sys.u_prev if u0 is None else u0, dtype=float)
    mass_prev = _mass(sys.u_prev, volumes)
    trace = IterationTrace(method=f"pseudo/{tab.name}")

    g0 = _weighted_norm(sys.g(u), volumes)
    scale = g0 if g0 > 0.0 else 1.0
    trace.record(g0 / scale, _mass(u, volumes) - mass_prev)

    for mu in mus:
        block = StageBlock(mu) if stages is not None else None
        u = erk_pseudo_step(u, sys, tab, mu * sys.dt, block)
        if block is not None:
            stages.append(block)
        trace.record(_weighted_norm(sys.g(u), volumes) / scale, _mass(u, volumes) - mass_prev)
        if not np.all(np.isfinite(u)):
            break
    return u, trace


@auto_instrument("pseudo_time")
def pseudo_solve(sys, tab: ButcherTableau, schedule: Union[PseudoSchedule, Sequence[float]],
                 u0: Optional[StateField] = None,
                 stages: Optional[List[StageBlock]] = None) -> Tuple[StateField, IterationTrace]:
    """N pseudo steps with Δτ_k = μ_k Δt from u^(0) = u^n; an empty schedule returns u^n"""
    if u0 is not None and not np.array_equal(sys.semi.raw(u0), sys.u_prev):
        raise ScheduleError("pseudo_solve starts from the previous physical state u^n; "
                            "use pseudo_iterate for other starting points")
    u, trace = pseudo_iterate(sys, tab, schedule, None, stages)
    return sys.semi.field(u), trace


def stage_weights(tab: ButcherTableau, mu: float) -> np.ndarray:
    """w with wᵀF = μ bᵀ(I + μA)⁻¹F, from the triangular system (I + μA)ᵀw = μb"""
    M = np.eye(tab.s) + mu * tab.A
    return scla.solve_triangular(M.T, mu * tab.b, lower=False)


def h_flux_oracle(sys, tab: ButcherTableau, schedule: Union[PseudoSchedule, Sequence[float]],
                  stages: Optional[List[StageBlock]] = None) -> Tuple[np.ndarray, ...]:
    """Interface fluxes ĥ of the conservative scheme equivalent to N pseudo steps from u^n.

    ĥ = Σ_k (Π_{l>k} φ(-μ_l)) μ_k bᵀ(I + μ_k A)⁻¹ F^{(k)}, one array per direction.
    Without recorded stages a pseudo solve from u^n is run to record them.
    """
    mus = _schedule_mus(schedule)
    if not mus:
        raise ScheduleError("the flux form of an empty schedule is undefined")
    if stages is None:
        stages = []
        pseudo_iterate(sys, tab, mus, None, stages)
    if len(stages) != len(mus):
        raise ScheduleError(f"{len(stages)} recorded stage blocks for a schedule of {len(mus)} steps")

    phis = [stability_function(tab, -mu) for mu in mus]
    directions = len(stages[0].fluxes[0])
    h = [np.zeros_like(stages[0].fluxes[0][d]) for d in range(directions)]
    for k, block in enumerate(stages):
        tail = 1.0
        for phi in phis[k + 1:]:
            tail *= phi
        weights = tail * stage_weights(tab, block.mu)
        for j, fluxes in enumerate(block.fluxes):
            for d in range(directions):
                h[d] = h[d] + weights[j] * fluxes[d]
    return tuple(h)


def flux_form_residual(sys, u_final: np.ndarray, h: Sequence[np.ndarray]) -> np.ndarray:
    """(u^{(N)} - u^n)/Δt + divergence of ĥ; vanishes to round-off for the oracle flux"""
    return (u_final - sys.u_prev) / sys.dt + sys.semi.divergence(h)


def stability_root(tab: ButcherTableau, upper: float = 3.0, scan_points: int = 600) -> Optional[float]:
    """Smallest positive μ ≤ upper with φ(-μ) = 0, or None"""
    if tab.s == 1 and tab.A[0, 0] == 0.0:
        root = 1.0 / tab.b[0]
        return root if root <= upper else None

    def phi(mu):
        return stability_function(tab, -mu)

    grid = np.linspace(upper / scan_points, upper, scan_points)
    values = [phi(mu) for mu in grid]
    for left, right, f_left, f_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f_left == 0.0:
            return float(left)
        if f_left * f_right < 0.0:
            return float(optimize.bisect(phi, left, right, xtol=1e-15, maxiter=200))
    return None


def root_first_schedule(tab: ButcherTableau, base_mu: float, n_tail: int, upper: float = 3.0,
                        scan_points: int = 600) -> PseudoSchedule:
    """[μ_root, base_μ × n_tail], whose modification constant is 1"""
    if n_tail < 0:
        raise ScheduleError(f"tail length must be nonnegative, got {n_tail}")
    root = stability_root(tab, upper, scan_points)
    if root is None:
        raise NoRealRootError(tab.name, upper)
    return PseudoSchedule(tab, [root] + [float(base_mu)] * n_tail)


def decay_schedule(tab: ButcherTableau, mu: float, target: float) -> PseudoSchedule:
    """Constant μ with the smallest N such that |φ(-μ)|^N ≤ target"""
    if not 0.0 < target < 1.0:
        raise ScheduleError(f"decay target must lie in (0, 1), got {target}")
    amplification = abs(stability_function(tab, -mu))
    if amplification >= 1.0:
        raise ScheduleError(f"|phi(-{mu})| = {amplification:.6g} does not decay for '{tab.name}'")
    if amplification == 0.0:
        return PseudoSchedule(tab, [mu])
    n = max(1, int(math.ceil(math.log(target) / math.log(amplification))))
    while n > 1 and amplification ** (n - 1) <= target:
        n -= 1
    while amplification ** n > target:
        n += 1
    return PseudoSchedule(tab, [mu] * n)


def geometric_schedule(tab: ButcherTableau, n: int, first: float = 1.0, ratio: float = 0.5) -> PseudoSchedule:
    """μ_l = first · ratio^l for l = 0..n-1"""
    return PseudoSchedule(tab, [first * ratio ** l for l in range(n)])
