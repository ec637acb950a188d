#!/usr/bin/env python3
"""
Experiment Document Validation
Loads experiment JSON documents into ExperimentSpec and reports problems with
the offending field and concrete suggestions.
"""

import json
import math
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.conserva_errors import ConservaError, SpecValidationError, UnknownTableauError
from app.experiments import ExperimentSpec, build_grid
from app.flux import SCALAR_FLUXES
from app.tableau_registry import TableauRegistry
from app.workbench_config import WorkbenchSettings

FLUXES_BY_PROBLEM = {
    "advection": ("central", "upwind", "central_printed"),
    "burgers": ("burgers_upwind",),
}


class ExperimentSpecValidator:
    """Validates experiment documents and provides detailed error reporting"""

    def __init__(self, registry: TableauRegistry, settings: WorkbenchSettings):
        self.registry = registry
        self.settings = settings

    def parse_json(self, spec_file: Path) -> dict:
        """
        Read and parse the JSON document.

        Raises:
            SpecValidationError: If the file is missing or is not a JSON object
        """
        try:
            content = spec_file.read_text(encoding='utf-8')
        except FileNotFoundError:
            raise SpecValidationError(f"Experiment file not found: {spec_file}", spec_file)
        except UnicodeDecodeError as e:
            raise SpecValidationError(f"File encoding error: {e}. Save the document as UTF-8.", spec_file)

        try:
            data = json.loads(content)
        except json.JSONDecodeError as e:
            raise SpecValidationError(f"JSON syntax error at line {e.lineno}, column {e.colno}: {e.msg}", spec_file)

        if not isinstance(data, dict):
            raise SpecValidationError(f"Experiment document must be a JSON object, got {type(data).__name__}",
                                      spec_file)
        return data

    def validate_model(self, data: dict, spec_file: Optional[Path] = None) -> ExperimentSpec:
        """
        Validate field types and intra-document rules.

        Raises:
            SpecValidationError: On the first pydantic error, with its field path
        """
        try:
            return ExperimentSpec.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"]) or None
            message = first["msg"].removeprefix("Value error, ")
            suggestions = []
            if e.error_count() > 1:
                suggestions.append(f"{e.error_count() - 1} further problem(s) in the same document")
            raise SpecValidationError(message, spec_file, location, suggestions)

    def validate_flux(self, spec: ExperimentSpec, spec_file: Optional[Path]):
        if spec.problem not in FLUXES_BY_PROBLEM:
            return
        name = spec.flux_name()
        allowed = FLUXES_BY_PROBLEM[spec.problem]
        if name not in SCALAR_FLUXES or name not in allowed:
            raise SpecValidationError(f"Flux '{name}' cannot be used for {spec.problem}", spec_file, "flux",
                                      [f"Valid fluxes: {', '.join(allowed)}"])

    def validate_schedules(self, spec: ExperimentSpec, spec_file: Optional[Path]):
        """Every schedule builds, and competing strategies reach the same pseudo time"""
        reached: List[float] = []
        for index, schedule_spec in enumerate(spec.schedules):
            try:
                schedule = schedule_spec.build(self.registry, self.settings)
            except UnknownTableauError:
                raise
            except ConservaError as e:
                raise SpecValidationError(e.message, spec_file, f"schedules.{index}", e.suggestions)
            reached.append(schedule.pseudo_time_reached)

        if spec.study in ("strategies", "vortex") and len(reached) > 1:
            for index, value in enumerate(reached[1:], start=1):
                if not math.isclose(value, reached[0], rel_tol=1e-12, abs_tol=1e-12):
                    raise SpecValidationError(
                        f"Strategies reach different pseudo times: {reached[0]:g} and {value:g}",
                        spec_file, f"schedules.{index}",
                        ["Compare strategies that integrate to the same point in pseudo time"])

        for index, solver in enumerate(spec.solvers):
            if solver.inner == "pseudo":
                self.registry.get(solver.tableau)

    def validate_grid(self, spec: ExperimentSpec, spec_file: Optional[Path]):
        if spec.problem == "constants":
            return
        try:
            grid = build_grid(spec)
        except ConservaError as e:
            raise SpecValidationError(e.message, spec_file, "dx")
        if spec.problem == "euler_vortex":
            return
        if any(solver.inner == "cgc" for solver in spec.solvers) and grid.m % 2:
            raise SpecValidationError(f"Coarse-grid correction needs an even cell count, got m={grid.m}",
                                      spec_file, "dx")
        if spec.solvers and grid.m > self.settings.solvers.max_dense_cells:
            raise SpecValidationError(
                f"{grid.m} cells exceed the dense-matrix limit {self.settings.solvers.max_dense_cells}",
                spec_file, "dx", ["Use a coarser grid or raise solvers.max_dense_cells in config.yaml"])
        if spec.inflow is not None and spec.initial != "step":
            raise SpecValidationError("An inflow value only applies to step initial data", spec_file, "inflow")

    def validate_data(self, data: dict, spec_file: Optional[Path] = None) -> ExperimentSpec:
        spec = self.validate_model(data, spec_file)
        self.validate_flux(spec, spec_file)
        self.validate_schedules(spec, spec_file)
        self.validate_grid(spec, spec_file)
        return spec

    def load(self, spec_file: Path) -> ExperimentSpec:
        """Parse and fully validate one experiment document"""
        spec_file = Path(spec_file)
        return self.validate_data(self.parse_json(spec_file), spec_file)
