"""
Uniform periodic grids, cell-average state storage, and the mass functional.

Cells are half-open intervals (x_i, x_{i+1}] with grid points x_i = a + i*dx.
All conservation statements in the workbench are phrased through total_mass.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from app.conserva_errors import ComponentRangeError, ConservaError, GridMismatchError

SamplePoints = Literal["nodes", "centers"]


@dataclass(frozen=True)
class Grid1D:
    """Periodic uniform mesh on (a, b] with m cells"""
    a: float
    b: float
    m: int
    periodic: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ConservaError(f"Grid1D needs at least one cell, got m={self.m}")
        if not self.b > self.a:
            raise ConservaError(f"Grid1D needs b > a, got ({self.a}, {self.b}]")

    @classmethod
    def with_spacing(cls, a: float, b: float, dx: float) -> "Grid1D":
        """Grid whose cell count is the nearest integer to (b - a)/dx"""
        return cls(a, b, max(1, int(round((b - a) / dx))))

    @property
    def ndim(self) -> int:
        return 1

    @property
    def shape(self) -> Tuple[int]:
        return (self.m,)

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.m

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.m, self.dx)

    @property
    def points(self) -> np.ndarray:
        return self.a + self.dx * np.arange(self.m)

    @property
    def centers(self) -> np.ndarray:
        return self.a + self.dx * (np.arange(self.m) + 0.5)

    def wrap(self, i: int) -> int:
        return i % self.m

    def coarsen(self) -> "Grid1D":
        """Agglomerate neighbouring cell pairs (2i, 2i+1)"""
        if self.m % 2:
            raise ConservaError(f"Cannot agglomerate an odd number of cells (m={self.m})",
                                suggestions=["Use an even cell count for coarse-grid correction"])
        return Grid1D(self.a, self.b, self.m // 2, self.periodic)


@dataclass(frozen=True)
class Grid2D:
    """Periodic uniform mesh on (x0, x1] x (y0, y1]"""
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    mx: int
    my: int

    def __post_init__(self):
        if self.mx < 1 or self.my < 1:
            raise ConservaError(f"Grid2D needs positive cell counts, got {self.mx}x{self.my}")
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ConservaError(f"Grid2D has an empty range: {self.x_range} x {self.y_range}")

    @classmethod
    def with_spacing(cls, x_range: Tuple[float, float], y_range: Tuple[float, float], h: float) -> "Grid2D":
        mx = max(1, int(round((x_range[1] - x_range[0]) / h)))
        my = max(1, int(round((y_range[1] - y_range[0]) / h)))
        return cls(tuple(x_range), tuple(y_range), mx, my)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.mx, self.my)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.mx

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.my

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.shape, self.dx * self.dy)

    @property
    def x_points(self) -> np.ndarray:
        return self.x_range[0] + self.dx * np.arange(self.mx)

    @property
    def y_points(self) -> np.ndarray:
        return self.y_range[0] + self.dy * np.arange(self.my)

    def mesh(self, at: SamplePoints = "nodes") -> Tuple[np.ndarray, np.ndarray]:
        shift = 0.5 if at == "centers" else 0.0
        x = self.x_range[0] + self.dx * (np.arange(self.mx) + shift)
        y = self.y_range[0] + self.dy * (np.arange(self.my) + shift)
        return np.meshgrid(x, y, indexing="ij")

    def wrap(self, i: int, j: int) -> Tuple[int, int]:
        return i % self.mx, j % self.my


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True)
class StateField:
    """Cell averages on a grid; values have shape grid.shape + (q,)"""
    grid: Grid
    values: np.ndarray
    component_names: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape == self.grid.shape:
            values = values[..., np.newaxis]
        if values.shape[:-1] != self.grid.shape or values.ndim != self.grid.ndim + 1:
            raise GridMismatchError(f"values of shape {values.shape} do not fit grid of shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConservaError("StateField contains non-finite values",
                                suggestions=["The producing solver diverged; inspect its iteration trace"])
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def q(self) -> int:
        return self.values.shape[-1]

    def component(self, k: int = 0) -> np.ndarray:
        if not 0 <= k < self.q:
            raise ComponentRangeError(k, self.q)
        return self.values[..., k]

    @property
    def scalar(self) -> np.ndarray:
        """The single component of a q = 1 field"""
        return self.component(0)

    def with_values(self, values: np.ndarray) -> "StateField":
        return StateField(self.grid, values, self.component_names)

    def at(self, *index: int) -> np.ndarray:
        """Cell values with periodic index wrap"""
        wrapped = tuple(i % n for i, n in zip(index, self.grid.shape))
        return self.values[wrapped]

    def names(self) -> Tuple[str, ...]:
        if self.component_names:
            return self.component_names
        return ("u",) if self.q == 1 else tuple(f"u{k}" for k in range(self.q))


def sample(func: Callable[..., np.ndarray], grid: Grid, at: SamplePoints = "nodes",
           component_names: Optional[Sequence[str]] = None) -> StateField:
    """Point values of func at grid points (default) or cell centers"""
    if isinstance(grid, Grid1D):
        x = grid.points if at == "nodes" else grid.centers
        values = np.asarray(func(x), dtype=float)
    else:
        x, y = grid.mesh(at)
        values = np.asarray(func(x, y), dtype=float)
    names = tuple(component_names) if component_names else None
    return StateField(grid, values, names)


def total_mass(u: StateField, component: int = 0) -> float:
    """Σ_i |Ω_i| u_{i,component}"""
    return float(np.sum(u.grid.volumes * u.component(component)))


def mass_error(u: StateField, reference: StateField, component: Optional[int] = None) -> float:
    """mass(u) - mass(reference) for one component, or summed over all components"""
    if u.grid != reference.grid:
        raise GridMismatchError(f"mass_error across different grids: {u.grid} vs {reference.grid}")
    if u.q != reference.q:
        raise GridMismatchError(f"mass_error across component counts {u.q} and {reference.q}")
    components = range(u.q) if component is None else [component]
    return float(sum(total_mass(u, k) - total_mass(reference, k) for k in components))


def state_rows(u: StateField) -> List[Dict[str, float]]:
    """One row per cell: x[, y] followed by the components"""
    names = u.names()
    if isinstance(u.grid, Grid1D):
        coords = {"x": u.grid.points}
    else:
        x, y = u.grid.mesh()
        coords = {"x": x.ravel(), "y": y.ravel()}
    flat = u.values.reshape(-1, u.q)
    rows = []
    for n in range(flat.shape[0]):
        row = {key: float(val[n]) for key, val in coords.items()}
        row.update({name: float(flat[n, k]) for k, name in enumerate(names)})
        rows.append(row)
    return rows

