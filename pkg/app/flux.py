"""
Physical fluxes and numerical flux stencils.

A NumericalFlux maps the stencil (w_{i-p}, ..., w_{i+q}) to the interface value
f̂_{i+1/2}. Scalar fluxes carry their partial derivatives so the semidiscretization
can assemble exact Jacobians.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from app.conserva_errors import ConservaError, VacuumStateError

GAMMA = 1.4


@dataclass(frozen=True)
class NumericalFlux:
    name: str
    left: int
    right: int
    rule: Callable[..., np.ndarray]
    physical: Callable[[np.ndarray], np.ndarray]
    derivatives: Optional[Callable[..., Sequence[np.ndarray]]] = None
    consistent: bool = True
    description: str = ""

    @property
    def offsets(self) -> range:
        return range(-self.left, self.right + 1)

    def __call__(self, *stencil: np.ndarray) -> np.ndarray:
        return self.rule(*stencil)

    def stencil(self, w: np.ndarray, axis: int = 0):
        """Shifted copies (w_{i+r}) for every offset r, periodic along axis"""
        return [np.roll(w, -r, axis=axis) for r in self.offsets]

    def interface_fluxes(self, w: np.ndarray, axis: int = 0) -> np.ndarray:
        """F[i] = f̂_{i+1/2} for all interfaces along axis"""
        return self.rule(*self.stencil(w, axis))


# ---------------------------------------------------------------------------
# scalar laws

def linear_flux(u):
    return u


def burgers_flux(u):
    return 0.5 * u * u


def central_advection(w_i, w_ip1):
    """Half difference (w_{i+1} - w_i)/2; not consistent with f(u) = u"""
    return 0.5 * (w_ip1 - w_i)


def central_average(w_i, w_ip1):
    """(w_i + w_{i+1})/2; its flux differences give Tridiag(-1/2, 0, 1/2)"""
    return 0.5 * (w_i + w_ip1)


def upwind_advection(w_i):
    return w_i


def upwind_burgers(w_i):
    return 0.5 * w_i * w_i


CENTRAL_PRINTED = NumericalFlux(
    "central_printed", 0, 1, central_advection, linear_flux,
    derivatives=lambda w_i, w_ip1: (np.full_like(w_i, -0.5), np.full_like(w_i, 0.5)),
    consistent=False,
    description="(w_{i+1} - w_i)/2, kept for reference only",
)

CENTRAL = NumericalFlux(
    "central", 0, 1, central_average, linear_flux,
    derivatives=lambda w_i, w_ip1: (np.full_like(w_i, 0.5), np.full_like(w_i, 0.5)),
    description="central flux for u_t + u_x = 0",
)

UPWIND = NumericalFlux(
    "upwind", 0, 0, upwind_advection, linear_flux,
    derivatives=lambda w_i: (np.ones_like(w_i),),
    description="upwind flux for u_t + u_x = 0",
)

BURGERS_UPWIND = NumericalFlux(
    "burgers_upwind", 0, 0, upwind_burgers, burgers_flux,
    derivatives=lambda w_i: (np.array(w_i, dtype=float),),
    description="upwind flux u_i^2/2 for Burgers with u >= 0",
)

SCALAR_FLUXES: Dict[str, NumericalFlux] = {f.name: f for f in (CENTRAL, CENTRAL_PRINTED, UPWIND, BURGERS_UPWIND)}


def get_flux(name: str) -> NumericalFlux:
    try:
        return SCALAR_FLUXES[name]
    except KeyError:
        raise ConservaError(f"Unknown numerical flux '{name}'",
                            suggestions=[f"Available fluxes: {', '.join(SCALAR_FLUXES)}"])


# ---------------------------------------------------------------------------
# compressible Euler, conservative variables (rho, rho*u, rho*v, rho*E)

def euler_pressure(state: np.ndarray, gamma: float = GAMMA) -> np.ndarray:
    rho = state[..., 0]
    kinetic = 0.5 * (state[..., 1] ** 2 + state[..., 2] ** 2) / rho
    return (gamma - 1.0) * (state[..., 3] - kinetic)


def check_physical(state: np.ndarray, gamma: float = GAMMA) -> np.ndarray:
    """Pressure of the state, raising on vacuum or negative pressure"""
    rho = state[..., 0]
    if np.any(rho <= 0.0):
        raise VacuumStateError(float(np.min(rho)), float("nan"))
    p = euler_pressure(state, gamma)
    if np.any(p <= 0.0) or not np.all(np.isfinite(p)):
        raise VacuumStateError(float(np.min(rho)), float(np.nanmin(p)))
    return p


def euler_physical_flux(state: np.ndarray, direction: int = 0, gamma: float = GAMMA) -> np.ndarray:
    """x-flux (direction 0) or y-flux (direction 1) of the 2D Euler equations"""
    p = check_physical(state, gamma)
    rho = state[..., 0]
    vel = state[..., 1 + direction] / rho
    flux = state * vel[..., np.newaxis]
    flux[..., 1 + direction] += p
    flux[..., 3] += p * vel
    return flux


def centered4_euler(w_im1, w_i, w_ip1, w_ip2, f: Callable[[np.ndarray], np.ndarray]):
    """Fourth-order centered interface flux with weights -1/12, 7/12, 7/12, -1/12"""
    return (-f(w_im1) + 7.0 * f(w_i) + 7.0 * f(w_ip1) - f(w_ip2)) / 12.0


def euler_centered4_flux(direction: int, gamma: float = GAMMA) -> NumericalFlux:
    def f(w):
        return euler_physical_flux(w, direction, gamma)

    return NumericalFlux(
        f"euler_centered4_{'xy'[direction]}", 1, 2,
        lambda w_im1, w_i, w_ip1, w_ip2: centered4_euler(w_im1, w_i, w_ip1, w_ip2, f),
        f,
        description="centered fourth-order Euler flux",
    )


# ---------------------------------------------------------------------------
# consistency / Lipschitz checks

def consistency_defect(flux: NumericalFlux, samples: np.ndarray) -> float:
    """max |f̂(u, ..., u) - f(u)| over the samples"""
    samples = np.asarray(samples, dtype=float)
    stencil = [samples] * len(flux.offsets)
    return float(np.max(np.abs(flux(*stencil) - flux.physical(samples))))


def lipschitz_estimate(flux: NumericalFlux, samples: np.ndarray, h: float = 1e-6) -> float:
    """Largest one-sided difference quotient of f̂ in any argument"""
    samples = np.asarray(samples, dtype=float)
    n = len(flux.offsets)
    base = [samples] * n
    f0 = flux(*base)
    worst = 0.0
    for k in range(n):
        shifted = list(base)
        shifted[k] = samples + h
        worst = max(worst, float(np.max(np.abs(flux(*shifted) - f0)) / h))
    return worst
