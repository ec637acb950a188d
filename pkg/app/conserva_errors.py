#!/usr/bin/env python3
"""
Conserva Error Classes
Provides specific, actionable error messages for invalid experiment documents,
tableaus, grids and numerical failures.
"""

from typing import List, Optional, Sequence
from pathlib import Path


class ConservaError(Exception):
    """Base class for workbench errors"""

    def __init__(self, message: str, source: Optional[Path] = None, suggestions: Optional[List[str]] = None):
        self.message = message
        self.source = source
        self.suggestions = suggestions or []
        super().__init__(self.get_formatted_message())

    def get_formatted_message(self) -> str:
        """Get a formatted error message with suggestions"""
        msg = self.message

        if self.source:
            msg = f"'{Path(self.source).name}': {msg}"

        if self.suggestions:
            msg += "\n\nSuggestions:"
            for suggestion in self.suggestions:
                msg += f"\n  • {suggestion}"

        return msg


class SpecValidationError(ConservaError):
    """Malformed or inconsistent experiment document"""

    def __init__(self, message: str, source: Optional[Path] = None, field_path: Optional[str] = None,
                 suggestions: Optional[List[str]] = None):
        self.field_path = field_path
        if field_path:
            message = f"{message} (field: {field_path})"

        suggestions = list(suggestions or [])
        suggestions.extend([
            "Compare your document with the bundled ones in specs/",
            "Run './conserva list' to see valid solvers, tableaus and studies",
        ])
        super().__init__(message, source, suggestions)


class UnknownTableauError(ConservaError):
    """Tableau name not found among built-ins or local documents"""

    def __init__(self, name: str, available: Sequence[str] = ()):
        message = f"Unknown tableau '{name}'"
        suggestions = []
        if available:
            suggestions.append(f"Available tableaus: {', '.join(sorted(available))}")
        suggestions.append("Add a JSON document {name, s, A, b, c} to the tableaus/ directory")
        suggestions.append("Or pass the path of a tableau JSON file directly")
        super().__init__(message, suggestions=suggestions)


class TableauError(ConservaError):
    """Butcher tableau that is not an explicit, consistent method"""

    def __init__(self, message: str, source: Optional[Path] = None):
        suggestions = [
            "A must be s x s and strictly lower triangular (explicit methods only)",
            "b and c must have s entries and the weights b must sum to 1",
        ]
        super().__init__(message, source, suggestions)


class NoRealRootError(ConservaError):
    """Stability polynomial has no positive real root on the scanned bracket"""

    def __init__(self, tableau_name: str, upper: float):
        message = f"Stability function of '{tableau_name}' has no real root for mu in (0, {upper:g}]"
        suggestions = [
            "Root-first schedules need a tableau whose phi(-mu) changes sign, e.g. euler or ssprk3",
            "Use a plain schedule and accept the modification constant c < 1",
        ]
        super().__init__(message, suggestions=suggestions)


class ScheduleError(ConservaError):
    """Invalid pseudo-time schedule"""

    def __init__(self, message: str):
        super().__init__(message, suggestions=["Pseudo-time step ratios mu_k must be positive and finite"])


class GridMismatchError(ConservaError):
    """Fields living on different grids or with different component counts"""

    def __init__(self, message: str):
        super().__init__(message, suggestions=["Create both fields from the same grid object"])


class ComponentRangeError(ConservaError):
    """Component index outside 0..q-1"""

    def __init__(self, component: int, q: int):
        super().__init__(f"Component {component} out of range for a field with {q} component(s)")


class ZeroDiagonalError(ConservaError):
    """Stationary sweep on a matrix with a zero diagonal entry"""

    def __init__(self, method: str, index: int):
        message = f"{method} needs a nonzero diagonal, entry {index} of (I - alpha*A) vanishes"
        suggestions = ["Use richardson, gmres or cgc for this system", "Check the sign convention of alpha"]
        super().__init__(message, suggestions=suggestions)


class SingularSystemError(ConservaError):
    """Direct solve of a singular (fine, coarse or Newton) matrix"""

    def __init__(self, what: str):
        super().__init__(f"{what} is singular", suggestions=["Reduce the time step or check the flux Jacobian"])


class VacuumStateError(ConservaError):
    """Euler state with nonpositive density or pressure"""

    def __init__(self, min_density: float, min_pressure: float):
        message = f"Nonphysical Euler state: min density {min_density:.6g}, min pressure {min_pressure:.6g}"
        suggestions = ["Reduce the pseudo-time step ratios", "Check the initial data formula and Mach number"]
        super().__init__(message, suggestions=suggestions)


class SolverDivergenceError(ConservaError):
    """Iteration produced non-finite values"""

    def __init__(self, solver: str, step: int, detail: str = "produced non-finite values"):
        message = f"Solver '{solver}' {detail} at physical step {step}"
        suggestions = ["Lower theta or mu", "Shorten the time step (dt_ratio)"]
        super().__init__(message, suggestions=suggestions)


class NonUnimodalError(ConservaError):
    """Peak tracking on data with more than one pronounced maximum"""

    def __init__(self, peaks: int):
        super().__init__(f"Expected a single pulse, found {peaks} pronounced maxima",
                         suggestions=["Track the peak on a smoother profile or a larger domain"])
