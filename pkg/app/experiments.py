"""
Experiment documents and the drivers that run them end to end.

An ExperimentSpec names a problem (advection, burgers, euler_vortex, constants)
and a study. Each driver builds the grid, the initial data and the per-step
solvers, marches in physical time and returns an ExperimentResult holding
plain tables ready for persistence.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import scipy.sparse.linalg as spla
from pydantic import BaseModel, Field, PositiveFloat, model_validator

from app.conserva_errors import ConservaError, SolverDivergenceError, SpecValidationError
from app.diagnostics import (
    ExactSolution, MassLedger, l2_error, measure_speed, observed_orders, peak_position, pulse_solution,
    shock_location, shock_predictions, step_solution, triangle_solution, vortex_center, vortex_density_solution,
    vortex_primitives,
)
from app.flux import GAMMA, euler_centered4_flux, get_flux
from app.grid_state import Grid1D, Grid2D, SamplePoints, StateField, sample, state_rows
from app.newton import NewtonConfig, newton_iterate
from app.pseudo_time import (
    ButcherTableau, PseudoSchedule, decay_schedule, geometric_schedule, pseudo_iterate, root_first_schedule,
    stability_function,
)
from app.semidisc import ImplicitEulerSystem, Scaling, SemiDiscretization, SemiDiscretization2D
from app.tableau_registry import TableauRegistry
from app.telemetry import auto_instrument, log_info, log_warn
from app.workbench_config import WorkbenchSettings, load_settings

Problem = Literal["advection", "burgers", "euler_vortex", "constants"]
Study = Literal["table1", "conservation", "convergence", "speed", "shock", "strategies", "vortex", "table2"]

STUDIES_BY_PROBLEM: Dict[str, Tuple[str, ...]] = {
    "advection": ("table1", "conservation", "convergence", "speed"),
    "burgers": ("table1", "conservation", "convergence", "shock", "strategies"),
    "euler_vortex": ("vortex", "convergence"),
    "constants": ("table2",),
}


class ScheduleSpec(BaseModel):
    """Pseudo-time schedule in one of several forms.

    explicit: the listed mus; constant: mu repeated n times; geometric: mu·2^-l
    for l < n (mu defaults to 1); root_first: a root of φ(-μ) followed by mu
    repeated n times; decay: constant mu with the fewest steps reaching
    |φ(-mu)|^N ≤ target.
    """
    tableau: str = "euler"
    form: Literal["explicit", "constant", "geometric", "root_first", "decay"] = "constant"
    mus: Optional[List[PositiveFloat]] = None
    mu: Optional[PositiveFloat] = None
    n: Optional[int] = Field(default=None, ge=0)
    target: Optional[float] = Field(default=None, gt=0, lt=1)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_form(self):
        needs = {
            "explicit": ("mus",),
            "constant": ("mu", "n"),
            "geometric": ("n",),
            "root_first": ("mu", "n"),
            "decay": ("mu", "target"),
        }[self.form]
        missing = [name for name in needs if getattr(self, name) is None]
        if missing:
            raise ValueError(f"schedule form '{self.form}' needs {', '.join(missing)}")
        if self.form == "explicit" and not self.mus:
            raise ValueError("explicit schedule needs at least one mu")
        if self.form in ("constant", "geometric") and self.n == 0:
            raise ValueError(f"{self.form} schedule needs n >= 1")
        return self

    def build(self, registry: TableauRegistry, settings: WorkbenchSettings) -> PseudoSchedule:
        tab = registry.get(self.tableau)
        if self.form == "explicit":
            return PseudoSchedule(tab, list(self.mus))
        if self.form == "constant":
            return PseudoSchedule(tab, [self.mu] * self.n)
        if self.form == "geometric":
            return geometric_schedule(tab, self.n, first=self.mu or 1.0)
        if self.form == "root_first":
            return root_first_schedule(tab, self.mu, self.n, settings.solvers.root_bracket_upper,
                                       settings.solvers.root_scan_points)
        return decay_schedule(tab, self.mu, self.target)

    def display_name(self) -> str:
        if self.label:
            return self.label
        if self.form == "explicit":
            return f"{self.tableau}[{','.join(f'{m:g}' for m in self.mus)}]"
        if self.form == "decay":
            return f"{self.tableau} mu={self.mu:g} to {self.target:g}"
        return f"{self.tableau} {self.form} mu={self.mu or 1:g} n={self.n}"


class SolverSpec(NewtonConfig):
    """Newton-based physical step: outer iterations plus an inner linear solver"""
    label: Optional[str] = None

    def display_name(self) -> str:
        if self.label:
            return self.label
        return self.inner if self.outer == 1 else f"{self.inner} x{self.outer}"


class ExperimentSpec(BaseModel):
    name: str
    problem: Problem
    study: Study
    domain: Tuple[float, float] = (-1.5, 1.5)
    y_domain: Tuple[float, float] = (-5.0, 5.0)
    dx: Optional[PositiveFloat] = None
    m: Optional[int] = Field(default=None, ge=1)
    dt_ratio: PositiveFloat = 1.0
    end_time: float = Field(default=1.0, ge=0)
    flux: Optional[str] = None
    scaling: Scaling = "per_dx"
    initial: Literal["pulse", "triangle", "step", "vortex"] = "pulse"
    width: PositiveFloat = 50.0
    sampling: SamplePoints = "nodes"
    inflow: Optional[float] = None
    solvers: List[SolverSpec] = Field(default_factory=list)
    schedules: List[ScheduleSpec] = Field(default_factory=list)
    refinements: List[int] = Field(default_factory=list)
    eps: PositiveFloat = 5.0
    mach: PositiveFloat = 0.5
    gamma: PositiveFloat = GAMMA
    save_states: bool = False

    @model_validator(mode="after")
    def _check_study(self):
        if self.study not in STUDIES_BY_PROBLEM[self.problem]:
            raise ValueError(f"study '{self.study}' is not available for problem '{self.problem}' "
                             f"(choose from {', '.join(STUDIES_BY_PROBLEM[self.problem])})")
        if self.problem != "constants" and self.dx is None and self.m is None:
            raise ValueError("give the grid as dx or m")
        if self.study in ("table1", "conservation") and not self.solvers:
            raise ValueError(f"study '{self.study}' needs at least one entry in solvers")
        if self.study not in ("table1", "conservation") and not self.schedules:
            raise ValueError(f"study '{self.study}' needs at least one entry in schedules")
        if self.study == "convergence" and (not self.refinements or self.dx is None):
            raise ValueError("convergence study needs a base dx and refinement levels")
        if self.problem == "euler_vortex" and self.dx is None:
            raise ValueError("the vortex grid is given by its spacing dx")
        if self.domain[1] <= self.domain[0]:
            raise ValueError(f"empty domain {self.domain}")
        return self

    def flux_name(self) -> str:
        if self.flux:
            return self.flux
        return "burgers_upwind" if self.problem == "burgers" else "central"


class ExperimentResult(BaseModel):
    name: str
    problem: str
    study: str
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    summary: Dict[str, Any] = Field(default_factory=dict)
    ledgers: List[MassLedger] = Field(default_factory=list)
    schedules: List[Dict[str, Any]] = Field(default_factory=list)
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# problem setup

StepFn = Callable[[ImplicitEulerSystem], Tuple[np.ndarray, Any]]

# a state this many times larger than the initial data counts as diverged
GROWTH_LIMIT = 1e6


def _initial_function(spec: ExperimentSpec) -> Callable[..., np.ndarray]:
    if spec.initial == "pulse":
        return lambda x: np.exp(-spec.width * x ** 2)
    if spec.initial == "triangle":
        return lambda x: triangle_solution()(x, 0.0)
    if spec.initial == "step":
        return lambda x: step_solution()(x, 0.0)
    raise ConservaError(f"initial data '{spec.initial}' is not a scalar profile")


def exact_solution(spec: ExperimentSpec, grid) -> Optional[ExactSolution]:
    """Original-law solution for the spec's initial data, when one is known"""
    if spec.problem == "advection" and spec.initial == "pulse":
        return pulse_solution(grid.length, spec.width)
    if spec.problem == "burgers" and spec.initial == "triangle":
        return triangle_solution()
    if spec.problem == "burgers" and spec.initial == "step":
        return step_solution()
    if spec.problem == "euler_vortex":
        return vortex_density_solution(grid.x_range[1] - grid.x_range[0], spec.eps, spec.mach, spec.gamma)
    return None


def build_grid(spec: ExperimentSpec, dx: Optional[float] = None):
    """Grid from m when given, otherwise from the spacing (dx overrides the spec's spacing)"""
    if spec.problem == "euler_vortex":
        return Grid2D.with_spacing(spec.domain, spec.y_domain, dx or spec.dx)
    if dx is None and spec.m is not None:
        return Grid1D(spec.domain[0], spec.domain[1], spec.m)
    return Grid1D.with_spacing(spec.domain[0], spec.domain[1], dx or spec.dx)


def time_steps(spec: ExperimentSpec, grid) -> Tuple[float, int]:
    """Δt = dt_ratio·Δx adjusted so that an integer number of steps lands on end_time"""
    nominal = spec.dt_ratio * grid.dx
    if spec.end_time == 0.0:
        return nominal, 0
    n = max(1, int(round(spec.end_time / nominal)))
    return spec.end_time / n, n


def vortex_state(grid: Grid2D, spec: ExperimentSpec, at: SamplePoints = "nodes") -> StateField:
    """Conservative variables (ρ, ρu, ρv, ρE) of the isentropic vortex"""
    def func(x, y):
        rho, u, v, p = vortex_primitives(x, y, spec.eps, spec.mach, spec.gamma)
        energy = p / (spec.gamma - 1.0) + 0.5 * rho * (u * u + v * v)
        return np.stack([rho, rho * u, rho * v, energy], axis=-1)

    return sample(func, grid, at, component_names=("rho", "rho_u", "rho_v", "rho_E"))


def build_problem(spec: ExperimentSpec, dx: Optional[float] = None):
    """(semidiscretization, initial raw state, pinned cells)"""
    grid = build_grid(spec, dx)
    if spec.problem == "euler_vortex":
        semi = SemiDiscretization2D(grid, euler_centered4_flux(0, spec.gamma), euler_centered4_flux(1, spec.gamma),
                                    4, ("rho", "rho_u", "rho_v", "rho_E"))
        return semi, np.array(vortex_state(grid, spec, spec.sampling).values), {}

    semi = SemiDiscretization(grid, get_flux(spec.flux_name()))
    u0 = np.array(sample(_initial_function(spec), grid, spec.sampling).scalar)
    pinned = {0: float(spec.inflow)} if spec.inflow is not None else {}
    for index, value in pinned.items():
        u0[index] = value
    return semi, u0, pinned


def _mass(u: np.ndarray, volumes: np.ndarray) -> float:
    """Mass of the first component (density for systems)"""
    first = u[..., 0] if u.ndim > volumes.ndim else u
    return float(np.sum(volumes * first))


def march(semi, u0: np.ndarray, dt: float, n_steps: int, step: StepFn, label: str,
          scaling: Scaling = "per_dx", pinned: Optional[Dict[int, float]] = None,
          ledger: Optional[MassLedger] = None,
          on_step: Optional[Callable[[int, np.ndarray, Any], None]] = None) -> np.ndarray:
    """Implicit-Euler time loop; each physical step is solved by step(sys)"""
    volumes = semi.grid.volumes
    u = np.array(u0, dtype=float)
    bound = GROWTH_LIMIT * (1.0 + float(np.max(np.abs(u))))
    if ledger is not None:
        ledger.record(_mass(u, volumes))
    for n in range(n_steps):
        sys = ImplicitEulerSystem(semi, dt, u, scaling, dict(pinned or {}))
        u, trace = step(sys)
        if not np.all(np.isfinite(u)):
            raise SolverDivergenceError(label, n + 1)
        if np.max(np.abs(u)) > bound:
            raise SolverDivergenceError(label, n + 1, f"grew beyond {bound:.3g}")
        if ledger is not None:
            ledger.record(_mass(u, volumes))
        if on_step is not None:
            on_step(n + 1, u, trace)
    return u


def pseudo_stepper(tab: ButcherTableau, mus: List[float]) -> StepFn:
    return lambda sys: pseudo_iterate(sys, tab, mus)


def newton_stepper(cfg: NewtonConfig, tab: Optional[ButcherTableau] = None) -> StepFn:
    return lambda sys: newton_iterate(sys, sys.u_prev, cfg, tab)


def _context(registry: Optional[TableauRegistry], settings: Optional[WorkbenchSettings]):
    settings = settings or load_settings()
    registry = registry or TableauRegistry(settings.resolve(settings.tableaus.local_dir))
    return registry, settings


def _resolved_solver(solver: SolverSpec, settings: WorkbenchSettings) -> SolverSpec:
    """Fill settings the document leaves unset from config.yaml"""
    defaults = {"theta": settings.solvers.richardson_theta,
                "gmres_breakdown_tol": settings.solvers.gmres_breakdown_tol}
    update = {name: value for name, value in defaults.items() if name not in solver.model_fields_set}
    return solver.model_copy(update=update) if update else solver


def _schedule_record(spec: ScheduleSpec, schedule: PseudoSchedule) -> Dict[str, Any]:
    return {
        "label": spec.display_name(),
        "tableau": schedule.tableau.name,
        "mus": list(schedule.mus),
        "N": schedule.N,
        "c": schedule.c,
        "pseudo_time": schedule.pseudo_time_reached,
    }


def _state_rows(semi, u: np.ndarray) -> List[Dict[str, float]]:
    return state_rows(semi.field(u))


# ---------------------------------------------------------------------------
# Newton-based studies

def _table1(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """One physical step with every configured solver from u^n"""
    semi, u0, pinned = build_problem(spec)
    dt, _ = time_steps(spec, semi.grid)
    rows = []
    for solver in spec.solvers:
        solver = _resolved_solver(solver, settings)
        tab = registry.get(solver.tableau) if solver.inner == "pseudo" else None
        sys = ImplicitEulerSystem(semi, dt, u0, spec.scaling, pinned)
        _, trace = newton_iterate(sys, u0, solver, tab)
        rows.append({
            "solver": solver.display_name(),
            "mass_error": trace.mass_error[-1],
            "residual": trace.residual[-1],
            "predicted_error": trace.predicted_error[-1],
        })
    result.tables["table1"] = rows
    result.summary["m"] = semi.grid.m
    result.summary["alpha"] = ImplicitEulerSystem(semi, dt, u0, spec.scaling).alpha


def _conservation(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """Mass history over the whole run for every solver"""
    semi, u0, pinned = build_problem(spec)
    if semi.grid.m > settings.solvers.max_dense_cells:
        raise SpecValidationError(f"{semi.grid.m} cells exceed solvers.max_dense_cells for Newton-based solvers")
    dt, n_steps = time_steps(spec, semi.grid)
    drift_columns: Dict[str, List[float]] = {}
    for solver in spec.solvers:
        solver = _resolved_solver(solver, settings)
        tab = registry.get(solver.tableau) if solver.inner == "pseudo" else None
        label = solver.display_name()
        ledger = MassLedger(name=label)
        march(semi, u0, dt, n_steps, newton_stepper(solver, tab), label, spec.scaling, pinned, ledger)
        result.ledgers.append(ledger)
        drift_columns[label] = [m - ledger.initial for m in ledger.masses]
        log_info("conservation run finished", solver=label, max_drift=ledger.max_drift)

    result.tables["mass_error"] = [
        {"step": n, "t": n * dt, **{label: col[n] for label, col in drift_columns.items()}}
        for n in range(n_steps + 1)
    ]
    result.summary["max_drift"] = {ledger.name: ledger.max_drift for ledger in result.ledgers}
    result.summary["steps"] = n_steps


# ---------------------------------------------------------------------------
# pseudo-time studies

def _convergence_member(spec: ExperimentSpec, schedule: PseudoSchedule, level: int) -> Dict[str, Any]:
    dx = spec.dx / 2 ** level
    semi, u0, pinned = build_problem(spec, dx)
    dt, n_steps = time_steps(spec, semi.grid)
    label = f"{schedule.tableau.name} j={level}"
    u = march(semi, u0, dt, n_steps, pseudo_stepper(schedule.tableau, schedule.mus), label, spec.scaling, pinned)
    exact = exact_solution(spec, semi.grid)
    field = semi.field(u)
    return {
        "level": level,
        "dx": semi.grid.dx,
        "m": int(np.prod(semi.grid.shape)),
        "error_original": l2_error(field, exact, spec.end_time, at=spec.sampling),
        "error_modified": l2_error(field, exact.modified(schedule.c), spec.end_time, at=spec.sampling),
    }


def _convergence_task(args) -> Dict[str, Any]:
    spec, schedule, level = args
    return _convergence_member(spec, schedule, level)


def _direct_baseline_member(spec: ExperimentSpec, level: int) -> Dict[str, Any]:
    """Implicit Euler solved exactly; the advection matrix is constant so it is factored once"""
    dx = spec.dx / 2 ** level
    semi, u0, pinned = build_problem(spec, dx)
    dt, n_steps = time_steps(spec, semi.grid)
    lu = spla.splu(ImplicitEulerSystem(semi, dt, u0, spec.scaling, pinned).sparse_jacobian(u0))
    u = march(semi, u0, dt, n_steps, lambda sys: (lu.solve(sys.u_prev), None), f"direct j={level}",
              spec.scaling, pinned)
    return {
        "level": level,
        "dx": semi.grid.dx,
        "m": semi.grid.m,
        "error_original": l2_error(semi.field(u), exact_solution(spec, semi.grid), spec.end_time, at=spec.sampling),
    }


def _convergence(spec: ExperimentSpec, registry, settings, result: ExperimentResult, jobs: int) -> None:
    """L2 errors against original and modified solutions on a grid sequence"""
    rows = []
    orders = {}
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        tasks = [(spec, schedule, level) for level in spec.refinements]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                members = list(pool.map(_convergence_task, tasks))
        else:
            members = [_convergence_task(task) for task in tasks]
        label = schedule_spec.display_name()
        for member in members:
            rows.append({"schedule": label, "c": schedule.c, **member})
            log_info("convergence member finished", schedule=label, **member)
        result.schedules.append(_schedule_record(schedule_spec, schedule))
        spacings = [member["dx"] for member in members]
        orders[label] = {
            "modified": observed_orders([member["error_modified"] for member in members], spacings),
            "original": observed_orders([member["error_original"] for member in members], spacings),
        }
    result.tables["convergence"] = rows
    result.summary["observed_orders"] = orders

    if spec.problem == "advection":
        baseline = [_direct_baseline_member(spec, level) for level in spec.refinements]
        result.tables["baseline"] = baseline
        result.summary["baseline_orders"] = observed_orders([row["error_original"] for row in baseline],
                                                            [row["dx"] for row in baseline])


def _speed(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """Track the pulse maximum and compare the measured speed deficit with φ(-μ)^N"""
    speed_rows = []
    peak_rows = []
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        label = schedule_spec.display_name()
        semi, u0, pinned = build_problem(spec)
        dt, n_steps = time_steps(spec, semi.grid)
        times = [0.0]
        peaks = [peak_position(u0, semi.grid, spec.sampling)]

        def record(n, u, trace, times=times, peaks=peaks, grid=semi.grid):
            times.append(n * dt)
            peaks.append(peak_position(u, grid, spec.sampling))

        march(semi, u0, dt, n_steps, pseudo_stepper(schedule.tableau, schedule.mus), label, spec.scaling,
              pinned, on_step=record)
        speed = measure_speed(times, peaks, semi.grid.length)
        predicted = 1.0 - schedule.c
        mu = schedule.mus[0]
        speed_rows.append({
            "schedule": label,
            "tableau": schedule.tableau.name,
            "mu": mu,
            "N": schedule.N,
            "c": schedule.c,
            "phi": float(stability_function(schedule.tableau, -mu)),
            "predicted_error": predicted,
            "measured_speed": speed,
            "measured_error": 1.0 - speed,
        })
        peak_rows.extend({"schedule": label, "t": t, "peak_x": x} for t, x in zip(times, peaks))
        result.schedules.append(_schedule_record(schedule_spec, schedule))
        if abs((1.0 - speed) - predicted) > 0.1 * abs(predicted):
            log_warn("speed deficit departs from prediction", schedule=label, measured=1.0 - speed,
                     predicted=predicted)
    result.tables["speed"] = speed_rows
    result.tables["peaks"] = peak_rows


def _shock(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """Shock position and errors against original and modified Burgers solutions"""
    rows = []
    family = "triangle" if spec.initial == "triangle" else "step"
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        label = schedule_spec.display_name()
        semi, u0, pinned = build_problem(spec)
        dt, n_steps = time_steps(spec, semi.grid)
        u = march(semi, u0, dt, n_steps, pseudo_stepper(schedule.tableau, schedule.mus), label, spec.scaling,
                  pinned)
        prediction = shock_predictions(family, schedule.c, spec.end_time)
        points = semi.grid.points if spec.sampling == "nodes" else semi.grid.centers
        measured = shock_location(u, points, 0.5 * prediction.height)
        exact = exact_solution(spec, semi.grid)
        field = semi.field(u)
        rows.append({
            "schedule": label,
            "N": schedule.N,
            "c": schedule.c,
            "predicted_location": prediction.location,
            "measured_location": measured,
            "predicted_height": prediction.height,
            "error_original": l2_error(field, exact, spec.end_time, at=spec.sampling),
            "error_modified": l2_error(field, exact.modified(schedule.c), spec.end_time, at=spec.sampling),
        })
        result.schedules.append(_schedule_record(schedule_spec, schedule))
        if spec.save_states:
            result.tables[f"state_{len(rows)}"] = _state_rows(semi, u)
    result.tables["shock"] = rows
    result.summary["dx"] = build_grid(spec).dx


def _strategies(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """Relative pseudo-time residuals per physical step for competing schedules"""
    summary_rows = []
    residual_rows = []
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        label = schedule_spec.display_name()
        semi, u0, pinned = build_problem(spec)
        dt, n_steps = time_steps(spec, semi.grid)
        traces = []

        def record(n, u, trace, traces=traces):
            traces.append(trace)

        ledger = MassLedger(name=label)
        march(semi, u0, dt, n_steps, pseudo_stepper(schedule.tableau, schedule.mus), label, spec.scaling,
              pinned, ledger, record)
        result.ledgers.append(ledger)
        for n, trace in enumerate(traces, start=1):
            residual_rows.extend(
                {"schedule": label, "step": n, "iteration": k, "relative_residual": r}
                for k, r in enumerate(trace.residual)
            )
        first = traces[0].residual if traces else [1.0]
        summary_rows.append({
            "schedule": label,
            "N": schedule.N,
            "c": schedule.c,
            "pseudo_time": schedule.pseudo_time_reached,
            "first_iterate_residual": first[1] if len(first) > 1 else first[0],
            "final_residual": first[-1],
        })
        result.schedules.append(_schedule_record(schedule_spec, schedule))
    result.tables["strategies"] = summary_rows
    result.tables["residuals"] = residual_rows


def _vortex(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    """Vortex position and density errors after end_time for each schedule"""
    rows = []
    residual_rows = []
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        label = schedule_spec.display_name()
        semi, u0, pinned = build_problem(spec)
        dt, n_steps = time_steps(spec, semi.grid)
        ledger = MassLedger(name=label)

        def record(n, u, trace, label=label):
            residual_rows.extend({"schedule": label, "step": n, "iteration": k, "relative_residual": r}
                                 for k, r in enumerate(trace.residual))

        u = march(semi, u0, dt, n_steps, pseudo_stepper(schedule.tableau, schedule.mus), label, spec.scaling,
                  pinned, ledger, record)
        result.ledgers.append(ledger)
        field = semi.field(u)
        exact = exact_solution(spec, semi.grid)
        cx, cy = vortex_center(field.component(0), semi.grid, spec.sampling)
        rows.append({
            "schedule": label,
            "N": schedule.N,
            "c": schedule.c,
            "center_x": cx,
            "center_y": cy,
            "predicted_x": schedule.c * spec.end_time,
            "error_original": l2_error(field, exact, spec.end_time, 0, spec.sampling),
            "error_modified": l2_error(field, exact.modified(schedule.c), spec.end_time, 0, spec.sampling),
            "density_drift": ledger.max_drift,
        })
        log_info("vortex run finished", schedule=label, center_x=cx, c=schedule.c)
        result.schedules.append(_schedule_record(schedule_spec, schedule))
        if spec.save_states:
            result.tables[f"state_{len(rows)}"] = _state_rows(semi, u)
    result.tables["vortex"] = rows
    result.tables["residuals"] = residual_rows


def _table2(spec: ExperimentSpec, registry, settings, result: ExperimentResult) -> None:
    rows = []
    for schedule_spec in spec.schedules:
        schedule = schedule_spec.build(registry, settings)
        rows.append({"tableau": schedule.tableau.name, "schedule": schedule_spec.display_name(),
                     "N": schedule.N, "c": schedule.c})
        result.schedules.append(_schedule_record(schedule_spec, schedule))
    result.tables["table2"] = rows


# ---------------------------------------------------------------------------
# drivers

def _run(spec: ExperimentSpec, studies: Dict[str, Callable], registry, settings, jobs: int) -> ExperimentResult:
    registry, settings = _context(registry, settings)
    started = time.perf_counter()
    result = ExperimentResult(name=spec.name, problem=spec.problem, study=spec.study)
    study = studies.get(spec.study)
    if study is None:
        raise SpecValidationError(f"problem '{spec.problem}' has no study '{spec.study}'", field_path="study")
    if spec.study == "convergence":
        study(spec, registry, settings, result, jobs)
    else:
        study(spec, registry, settings, result)
    result.wall_time = time.perf_counter() - started
    return result


@auto_instrument("experiment")
def run_advection(spec: ExperimentSpec, registry: Optional[TableauRegistry] = None,
                  settings: Optional[WorkbenchSettings] = None, jobs: int = 1) -> ExperimentResult:
    return _run(spec, {"table1": _table1, "conservation": _conservation, "convergence": _convergence,
                       "speed": _speed}, registry, settings, jobs)


@auto_instrument("experiment")
def run_burgers(spec: ExperimentSpec, registry: Optional[TableauRegistry] = None,
                settings: Optional[WorkbenchSettings] = None, jobs: int = 1) -> ExperimentResult:
    return _run(spec, {"table1": _table1, "conservation": _conservation, "convergence": _convergence,
                       "shock": _shock, "strategies": _strategies}, registry, settings, jobs)


@auto_instrument("experiment")
def run_euler_vortex(spec: ExperimentSpec, registry: Optional[TableauRegistry] = None,
                     settings: Optional[WorkbenchSettings] = None, jobs: int = 1) -> ExperimentResult:
    return _run(spec, {"vortex": _vortex, "convergence": _convergence}, registry, settings, jobs)


@auto_instrument("experiment")
def run_constants(spec: ExperimentSpec, registry: Optional[TableauRegistry] = None,
                  settings: Optional[WorkbenchSettings] = None, jobs: int = 1) -> ExperimentResult:
    return _run(spec, {"table2": _table2}, registry, settings, jobs)


DRIVERS = {
    "advection": run_advection,
    "burgers": run_burgers,
    "euler_vortex": run_euler_vortex,
    "constants": run_constants,
}


def run_experiment(spec: ExperimentSpec, registry: Optional[TableauRegistry] = None,
                   settings: Optional[WorkbenchSettings] = None, jobs: int = 1) -> ExperimentResult:
    return DRIVERS[spec.problem](spec, registry, settings, jobs)
