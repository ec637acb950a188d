"""
Error norms against original and modified exact solutions, pulse and shock tracking,
and the mass ledger used for conservation audits.

A modified conservation law u_t + c f(u)_x = 0 is the original one run at time c·t,
so every modified solution here is the original evaluated at c·t.
"""

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.conserva_errors import ConservaError, NonUnimodalError
from app.flux import GAMMA
from app.grid_state import Grid1D, Grid2D, SamplePoints, StateField


@dataclass(frozen=True)
class ExactSolution:
    """original(*coords, t) evaluated at time c·t; c = 1 is the original law"""
    family: str
    original: Callable[..., np.ndarray]
    c: float = 1.0

    @property
    def is_modified(self) -> bool:
        return self.c != 1.0

    def modified(self, c: float) -> "ExactSolution":
        return replace(self, c=float(c))

    def __call__(self, *coords_and_t):
        *coords, t = coords_and_t
        return self.original(*coords, self.c * t)


def _wrap(x, a: float, length: float):
    """Periodic image of x in (a, a + length]"""
    return a + np.mod(x - a, length)


def pulse_solution(length: float, width: float = 50.0, center: float = 0.0) -> ExactSolution:
    """exp(-width (x - center - t)^2) transported with unit speed on a periodic domain of this length"""

    def original(x, t):
        shifted = _wrap(np.asarray(x, dtype=float) - t - center, -length / 2, length)
        return np.exp(-width * shifted ** 2)

    return ExactSolution("pulse", original)


def triangle_solution() -> ExactSolution:
    """Burgers: u = x/(t+1) for 0 ≤ x ≤ √(t+1)/2, zero elsewhere"""
    def original(x, t):
        x = np.asarray(x, dtype=float)
        tip = 0.5 * math.sqrt(t + 1.0)
        return np.where((x >= 0.0) & (x <= tip), x / (t + 1.0), 0.0)

    return ExactSolution("triangle", original)


def step_solution(position: float = 0.24, left: float = 1.0, right: float = 0.0) -> ExactSolution:
    """Burgers step moving at the Rankine-Hugoniot speed (left + right)/2"""
    speed = 0.5 * (left + right)

    def original(x, t):
        x = np.asarray(x, dtype=float)
        return np.where(x <= position + speed * t, left, right)

    return ExactSolution("step", original)


def vortex_primitives(x, y, eps: float = 5.0, mach: float = 0.5, gamma: float = GAMMA):
    """Density, velocities and pressure of the isentropic vortex centred at the origin"""
    r = 1.0 - x ** 2 - y ** 2
    base = 1.0 - eps ** 2 * (gamma - 1.0) * mach ** 2 * np.exp(r) / (8.0 * math.pi ** 2)
    if np.any(base <= 0.0):
        raise ConservaError(f"Vortex density base {float(np.min(base)):.4g} is not positive",
                            suggestions=["Lower the circulation or the Mach number"])
    rho = base ** (1.0 / (gamma - 1.0))
    u = 1.0 - eps * y * np.exp(r / 2.0) / (2.0 * math.pi)
    v = eps * x * np.exp(r / 2.0) / (2.0 * math.pi)
    p = rho ** gamma / (gamma * mach ** 2)
    return rho, u, v, p


def vortex_density_solution(length: float, eps: float = 5.0, mach: float = 0.5,
                            gamma: float = GAMMA) -> ExactSolution:
    """Vortex density translated with unit speed along x, periodic in x with this period"""

    def original(x, y, t):
        shifted = _wrap(np.asarray(x, dtype=float) - t, -length / 2, length)
        return vortex_primitives(shifted, np.asarray(y, dtype=float), eps, mach, gamma)[0]

    return ExactSolution("vortex", original)


def _sample_coords(grid, at: SamplePoints):
    if isinstance(grid, Grid1D):
        return (grid.points if at == "nodes" else grid.centers,)
    return grid.mesh(at)


def l2_error(u: StateField, exact: ExactSolution, t: float, component: int = 0,
             at: SamplePoints = "nodes") -> float:
    """sqrt(Σ_i |Ω_i| (u_i - exact(x_i, t))²)"""
    diff = u.component(component) - exact(*_sample_coords(u.grid, at), t)
    return float(np.sqrt(np.sum(u.grid.volumes * diff * diff)))


def observed_orders(errors: Sequence[float], spacings: Sequence[float]) -> List[float]:
    """log(e_k/e_{k+1}) / log(h_k/h_{k+1}) for successive grids"""
    return [
        math.log(errors[k] / errors[k + 1]) / math.log(spacings[k] / spacings[k + 1])
        for k in range(len(errors) - 1)
    ]


def _pronounced_maxima(values: np.ndarray) -> int:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        return 1
    left = np.roll(values, 1)
    right = np.roll(values, -1)
    is_max = (values > left) & (values >= right) & (values - lo >= 0.5 * (hi - lo))
    return int(np.count_nonzero(is_max))


def peak_position(values: np.ndarray, grid: Grid1D, at: SamplePoints = "nodes") -> float:
    """Abscissa of the maximum by a quadratic through the largest sample and its periodic neighbours"""
    values = np.asarray(values, dtype=float)
    peaks = _pronounced_maxima(values)
    if peaks != 1:
        raise NonUnimodalError(peaks)
    i = int(np.argmax(values))
    f_l, f_0, f_r = values[i - 1], values[i], values[(i + 1) % grid.m]
    curvature = f_l - 2.0 * f_0 + f_r
    offset = 0.5 * (f_l - f_r) / curvature if curvature != 0.0 else 0.0
    x = (grid.points if at == "nodes" else grid.centers)[i]
    return float(x + offset * grid.dx)


def unwrap_positions(positions: Sequence[float], period: float) -> np.ndarray:
    """Continue periodic positions across the seam by minimal displacement"""
    out = [float(positions[0])]
    for p in positions[1:]:
        step = float(p) - out[-1]
        step -= period * round(step / period)
        out.append(out[-1] + step)
    return np.array(out)


def measure_speed(times: Sequence[float], positions: Sequence[float], period: Optional[float] = None) -> float:
    """Least-squares slope of (unwrapped) peak position against time"""
    if len(times) < 2 or len(times) != len(positions):
        raise ConservaError(f"measure_speed needs at least two matching samples, got {len(times)}/{len(positions)}")
    track = unwrap_positions(positions, period) if period else np.asarray(positions, dtype=float)
    slope, _ = np.polyfit(np.asarray(times, dtype=float), track, 1)
    return float(slope)


class ShockPrediction(BaseModel):
    problem: Literal["triangle", "step"]
    c: float
    t: float
    location: float
    height: float


def shock_predictions(problem: str, c: float, t: float) -> ShockPrediction:
    """Tip of the triangle (√(ct+1)/2, height tip/(ct+1)) or front of the step (0.24 + ct/2)"""
    if t < 0:
        raise ConservaError(f"shock prediction needs t >= 0, got {t}")
    if problem == "triangle":
        tip = 0.5 * math.sqrt(c * t + 1.0)
        return ShockPrediction(problem=problem, c=c, t=t, location=tip, height=tip / (c * t + 1.0))
    if problem == "step":
        return ShockPrediction(problem=problem, c=c, t=t, location=0.24 + 0.5 * c * t, height=1.0)
    raise ConservaError(f"No shock prediction for problem '{problem}'",
                        suggestions=["Use 'triangle' or 'step'"])


def shock_location(values: np.ndarray, points: np.ndarray, threshold: float) -> float:
    """Last crossing of threshold from above, linearly interpolated between samples"""
    values = np.asarray(values, dtype=float)
    above = np.flatnonzero(values > threshold)
    if above.size == 0:
        raise ConservaError(f"No sample exceeds the shock threshold {threshold:g}")
    i = int(above[-1])
    if i + 1 >= values.size:
        return float(points[i])
    dx = points[i + 1] - points[i]
    return float(points[i] + (values[i] - threshold) / (values[i] - values[i + 1]) * dx)


def vortex_center(rho: np.ndarray, grid: Grid2D, at: SamplePoints = "nodes") -> Tuple[float, float]:
    """Density minimum, refined along x by a periodic quadratic fit"""
    i, j = np.unravel_index(int(np.argmin(rho)), rho.shape)
    f_l, f_0, f_r = rho[i - 1, j], rho[i, j], rho[(i + 1) % grid.mx, j]
    curvature = f_l - 2.0 * f_0 + f_r
    offset = 0.5 * (f_l - f_r) / curvature if curvature != 0.0 else 0.0
    x, y = grid.mesh(at)
    return float(x[i, j] + offset * grid.dx), float(y[i, j])


class MassLedger(BaseModel):
    """Total mass after every physical step of one solver configuration"""
    name: str
    masses: List[float] = Field(default_factory=list)

    def record(self, mass: float) -> None:
        self.masses.append(float(mass))

    @property
    def initial(self) -> float:
        return self.masses[0]

    @property
    def final(self) -> float:
        return self.masses[-1]

    @property
    def max_drift(self) -> float:
        return max(abs(m - self.masses[0]) for m in self.masses) if self.masses else 0.0

    def conserved(self, tol: float = 1e-11) -> bool:
        """max_k |mass_k - mass_0| ≤ tol (1 + |mass_0|)"""
        return self.max_drift <= tol * (1.0 + abs(self.initial))

    def summary(self) -> dict:
        return {"name": self.name, "initial": self.initial, "final": self.final, "max_drift": self.max_drift}
