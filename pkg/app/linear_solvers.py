"""
Iterative solvers for (I - αA)x = b with per-iterate conservation diagnostics.

A is assumed conservative: Σ_i |Ω_i| (Ay)_i = 0 for every y. Under that assumption
Richardson, GMRES and coarse-grid correction keep mass(x) = mass(b) whenever the
initial guess does, while Jacobi and Gauss-Seidel introduce the errors recorded
in the trace's predicted_error column.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as scla
from pydantic import BaseModel, Field

from app.conserva_errors import ConservaError, SingularSystemError, ZeroDiagonalError
from app.telemetry import auto_instrument


@dataclass
class LinearSystem:
    """(I - αA)x = b on cells with volumes |Ω_i|"""
    A: np.ndarray
    alpha: float
    b: np.ndarray
    volumes: Optional[np.ndarray] = None
    _matrix: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.shape != (self.b.size, self.b.size):
            raise ConservaError(f"operator of shape {self.A.shape} does not match right-hand side of size {self.b.size}")
        self.volumes = np.ones(self.b.size) if self.volumes is None else np.asarray(self.volumes, dtype=float)

    @property
    def size(self) -> int:
        return self.b.size

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.eye(self.size) - self.alpha * self.A
        return self._matrix

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.b - self.matrix @ x

    def mass(self, v: np.ndarray) -> float:
        return float(np.sum(self.volumes * v))

    def norm(self, v: np.ndarray) -> float:
        """sqrt(Σ |Ω_i| v_i²)"""
        return float(np.sqrt(np.sum(self.volumes * v * v)))

    def as_pseudo_problem(self, dt: float = 1.0) -> "LinearPseudoProblem":
        return LinearPseudoProblem(self, dt)


@dataclass
class LinearPseudoProblem:
    """g(x) = ((I - αA)x - b)/Δt so that pseudo-time marching solves the linear system"""
    system: LinearSystem
    dt: float = 1.0

    @property
    def u_prev(self) -> np.ndarray:
        return self.system.b

    @property
    def volumes(self) -> np.ndarray:
        return self.system.volumes

    def g(self, x: np.ndarray) -> np.ndarray:
        return (self.system.matrix @ x - self.system.b) / self.dt

    def apply_constraints(self, x: np.ndarray) -> np.ndarray:
        return x


class IterationTrace(BaseModel):
    """Per-iterate residual, mass error and (for stationary sweeps) predicted conservation error"""
    method: str
    residual: List[float] = Field(default_factory=list)
    mass_error: List[float] = Field(default_factory=list)
    predicted_error: List[float] = Field(default_factory=list)
    iterates: List[List[float]] = Field(default_factory=list)
    keep_iterates: bool = False

    def record(self, residual: float, mass_error: float, predicted: float = math.nan,
               iterate: Optional[np.ndarray] = None) -> None:
        self.residual.append(float(residual))
        self.mass_error.append(float(mass_error))
        self.predicted_error.append(float(predicted))
        if self.keep_iterates and iterate is not None:
            self.iterates.append([float(v) for v in np.ravel(iterate)])

    def __len__(self) -> int:
        return len(self.residual)

    @property
    def diverged(self) -> bool:
        return not all(math.isfinite(r) for r in self.residual)

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"iteration": k, "residual": r, "mass_error": e, "predicted_error": p}
            for k, (r, e, p) in enumerate(zip(self.residual, self.mass_error, self.predicted_error))
        ]


def _start(sys: LinearSystem, x0: Optional[np.ndarray], method: str, keep_iterates: bool):
    x = np.zeros(sys.size) if x0 is None else np.array(x0, dtype=float)
    trace = IterationTrace(method=method, keep_iterates=keep_iterates)
    trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), iterate=x)
    return x, trace


def solve_direct(sys: LinearSystem) -> np.ndarray:
    try:
        return scla.solve(sys.matrix, sys.b)
    except scla.LinAlgError:
        raise SingularSystemError("I - alpha*A")


@auto_instrument("linear")
def richardson(sys: LinearSystem, theta: float, x0: Optional[np.ndarray] = None, k: int = 1,
               keep_iterates: bool = False) -> Tuple[np.ndarray, IterationTrace]:
    """x <- x + θ(b - (I - αA)x)"""
    x, trace = _start(sys, x0, "richardson", keep_iterates)
    for _ in range(k):
        x = x + theta * sys.residual(x)
        trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), iterate=x)
    return x, trace


def _diagonal(sys: LinearSystem, method: str) -> np.ndarray:
    d = np.diag(sys.matrix).copy()
    zero = np.flatnonzero(d == 0.0)
    if zero.size:
        raise ZeroDiagonalError(method, int(zero[0]))
    return d


@auto_instrument("linear")
def jacobi(sys: LinearSystem, x0: Optional[np.ndarray] = None, k: int = 1,
           keep_iterates: bool = False) -> Tuple[np.ndarray, IterationTrace]:
    """Jacobi sweeps; predicted error α Σ|Ω_i| a_ii (x_i^{k+1} - x_i^k)"""
    d = _diagonal(sys, "jacobi")
    a_diag = np.diag(sys.A)
    x, trace = _start(sys, x0, "jacobi", keep_iterates)
    for _ in range(k):
        x_new = x + sys.residual(x) / d
        predicted = sys.alpha * np.sum(sys.volumes * a_diag * (x_new - x))
        x = x_new
        trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), predicted, iterate=x)
    return x, trace


@auto_instrument("linear")
def gauss_seidel(sys: LinearSystem, x0: Optional[np.ndarray] = None, k: int = 1,
                 keep_iterates: bool = False) -> Tuple[np.ndarray, IterationTrace]:
    """Forward sweeps; predicted error -α Σ_i |Ω_i| Σ_{j>i} a_ij (x_j^{k+1} - x_j^k)"""
    _diagonal(sys, "gauss_seidel")
    M = sys.matrix
    lower = np.tril(M)
    upper = np.triu(M, 1)
    strict_upper_A = np.triu(sys.A, 1)
    x, trace = _start(sys, x0, "gauss_seidel", keep_iterates)
    for _ in range(k):
        x_new = scla.solve_triangular(lower, sys.b - upper @ x, lower=True)
        predicted = -sys.alpha * np.sum(sys.volumes * (strict_upper_A @ (x_new - x)))
        x = x_new
        trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), predicted, iterate=x)
    return x, trace


@auto_instrument("linear")
def gmres(sys: LinearSystem, x0: Optional[np.ndarray] = None, k: int = 1, breakdown_tol: float = 1e-14,
          keep_iterates: bool = False) -> Tuple[np.ndarray, IterationTrace]:
    """Unrestarted, unpreconditioned GMRES with Givens rotations; minimizes ||b - Mx||_2 over x0 + K_k"""
    if k > sys.size:
        raise ConservaError(f"gmres needs k <= m, got k={k} for m={sys.size}")
    x0, trace = _start(sys, x0, "gmres", keep_iterates)
    if k == 0:
        return x0, trace

    M = sys.matrix
    r0 = sys.residual(x0)
    gamma = [scla.norm(r0)]
    if gamma[0] == 0.0:
        return x0, trace

    v = [r0 / gamma[0]]
    h = np.zeros((k + 1, k))
    c = np.zeros(k)
    s = np.zeros(k)
    x = x0

    for j in range(k):
        # Arnoldi: expand the subspace and update H
        wj = M @ v[j]
        for i in range(j + 1):
            h[i, j] = v[i] @ wj
            wj -= h[i, j] * v[i]
        h_next = scla.norm(wj)
        h[j + 1, j] = h_next
        breakdown = h_next <= breakdown_tol * gamma[0]

        # Apply previous rotations, then the new one
        for i in range(j):
            hij = c[i] * h[i, j] + s[i] * h[i + 1, j]
            hip1j = -s[i] * h[i, j] + c[i] * h[i + 1, j]
            h[i, j], h[i + 1, j] = hij, hip1j
        beta = np.hypot(h[j, j], h[j + 1, j])
        s[j] = h[j + 1, j] / beta
        c[j] = h[j, j] / beta
        h[j, j] = beta
        h[j + 1, j] = 0.0

        gamma.append(-s[j] * gamma[j])
        gamma[j] = c[j] * gamma[j]

        y = scla.solve_triangular(h[:j + 1, :j + 1], np.array(gamma[:j + 1]), lower=False)
        x = x0 + np.column_stack(v[:j + 1]) @ y
        trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), iterate=x)

        if breakdown:
            # happy breakdown: the Krylov space is invariant and x is exact
            break
        v.append(wj / h_next)

    return x, trace


def agglomeration_operators(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """R with rows (1/2, 1/2) over cell pairs (2i, 2i+1) and P = 2Rᵀ"""
    if m % 2:
        raise ConservaError(f"agglomeration needs an even cell count, got m={m}")
    R = np.zeros((m // 2, m))
    idx = np.arange(m // 2)
    R[idx, 2 * idx] = 0.5
    R[idx, 2 * idx + 1] = 0.5
    return R, 2.0 * R.T


def restrict(v: np.ndarray) -> np.ndarray:
    return 0.5 * (v[0::2] + v[1::2])


@auto_instrument("linear")
def cgc(sys: LinearSystem, x0: Optional[np.ndarray], restriction: np.ndarray, prolongation: np.ndarray,
        coarse_matrix: Optional[np.ndarray] = None, k: int = 1,
        keep_iterates: bool = False) -> Tuple[np.ndarray, IterationTrace]:
    """Two-level correction x <- x + P (I - αA)_c⁻¹ R (b - (I - αA)x) with an exact coarse solve.

    coarse_matrix is the rediscretized coarse operator; without it the Galerkin
    product R (I - αA) P is used.
    """
    if coarse_matrix is None:
        coarse_matrix = restriction @ sys.matrix @ prolongation
    try:
        lu = scla.lu_factor(coarse_matrix, check_finite=True)
    except (scla.LinAlgError, ValueError):
        raise SingularSystemError("coarse operator")
    if np.any(np.diag(lu[0]) == 0.0):
        raise SingularSystemError("coarse operator")

    x, trace = _start(sys, x0, "cgc", keep_iterates)
    for _ in range(k):
        correction = scla.lu_solve(lu, restriction @ sys.residual(x))
        x = x + prolongation @ correction
        trace.record(sys.norm(sys.residual(x)), sys.mass(x) - sys.mass(sys.b), iterate=x)
    return x, trace
