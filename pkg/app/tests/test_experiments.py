#!/usr/bin/env python3
"""
Experiment driver tests on small grids: every study runs end to end and
produces the tables and ledgers the persistence layer expects.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

import numpy as np

from app.conserva_errors import SolverDivergenceError, SpecValidationError
from app.experiments import (
    ExperimentSpec, SolverSpec, _resolved_solver, build_grid, build_problem, march, newton_stepper, run_experiment,
    time_steps,
)
from app.flux import CENTRAL
from app.grid_state import Grid1D
from app.newton import NewtonConfig
from app.semidisc import SemiDiscretization
from app.tableau_registry import TableauRegistry
from app.tests.harness import PROJECT_ROOT, exit_with, run_suite
from app.workbench_config import WorkbenchSettings, load_settings


def _run(data, jobs=1):
    spec = ExperimentSpec.model_validate(data)
    settings = load_settings()
    return run_experiment(spec, TableauRegistry(settings.resolve(settings.tableaus.local_dir)), settings, jobs)


def _bundled(name):
    return json.loads((PROJECT_ROOT / "specs" / f"{name}.json").read_text())


def test_table1_advection_rows():
    result = _run(_bundled("table1_advection"))
    rows = {row["solver"]: row for row in result.tables["table1"]}
    assert list(rows) == ["Exact", "R", "J", "GS", "GM", "CGC", "H"]
    for label in ("Exact", "R", "J", "GM", "CGC", "H"):
        assert abs(rows[label]["mass_error"]) < 1e-13, label
    assert abs(rows["GS"]["mass_error"] - (-0.094)) < 1e-3
    assert rows["Exact"]["residual"] < 1e-14
    for label, value in (("R", 0.331), ("J", 0.433), ("GM", 0.327), ("CGC", 0.162), ("H", 0.287)):
        assert abs(rows[label]["residual"] - value) < 1e-3, label
    assert result.summary["m"] == 6 and result.summary["alpha"] == -1.0


def test_table1_burgers_rows():
    result = _run(_bundled("table1_burgers"))
    rows = {row["solver"]: row for row in result.tables["table1"]}
    assert abs(rows["J"]["mass_error"] - 0.031) < 1e-3
    assert abs(rows["GS"]["mass_error"] - (-0.034)) < 1e-3
    for label in ("Exact", "R", "GM", "CGC", "H"):
        assert abs(rows[label]["mass_error"]) < 1e-13, label


def test_table2_constants():
    result = _run(_bundled("table2"))
    expected = [0.1855, 0.1812, 0.1813, 1.0, 0.7845, 0.8616]
    values = [row["c"] for row in result.tables["table2"]]
    assert all(abs(v - e) < 5e-5 for v, e in zip(values, expected)), values
    assert len(result.schedules) == 6


def test_time_steps_land_on_end_time():
    spec = ExperimentSpec.model_validate(_bundled("speed"))
    grid = build_grid(spec)
    assert grid.m == 133
    dt, n = time_steps(spec, grid)
    assert abs(n * dt - spec.end_time) < 1e-12
    assert abs(dt - grid.dx) / grid.dx < 0.01


def test_step_inflow_is_pinned():
    spec = ExperimentSpec.model_validate(_bundled("burgers_step"))
    _, u0, pinned = build_problem(spec)
    assert pinned == {0: 1.0} and u0[0] == 1.0


def test_small_conservation_study():
    result = _run({
        "name": "small_conservation", "problem": "advection", "study": "conservation",
        "domain": [-1.0, 1.0], "m": 40, "end_time": 0.5, "flux": "central",
        "solvers": [
            {"label": "exact", "inner": "exact"},
            {"label": "gmres", "inner": "gmres", "inner_iterations": 5},
            {"label": "cgc", "inner": "cgc"},
            {"label": "gs", "inner": "gauss_seidel", "inner_iterations": 5},
        ],
    })
    ledgers = {ledger.name: ledger for ledger in result.ledgers}
    for label in ("exact", "gmres", "cgc"):
        assert ledgers[label].conserved(), (label, ledgers[label].max_drift)
    assert ledgers["gs"].max_drift > 1e-8
    table = result.tables["mass_error"]
    assert len(table) == result.summary["steps"] + 1
    assert table[0]["exact"] == 0.0


def test_small_convergence_study_in_parallel():
    data = {
        "name": "small_convergence", "problem": "advection", "study": "convergence",
        "domain": [-1.0, 1.0], "dx": 0.05, "end_time": 0.5, "flux": "upwind", "refinements": [0, 1, 2],
        "schedules": [{"tableau": "euler", "form": "constant", "mu": 0.05, "n": 4}],
    }
    serial = _run(data)
    parallel = _run(data, jobs=2)
    assert serial.tables["convergence"] == parallel.tables["convergence"]
    rows = serial.tables["convergence"]
    modified = [row["error_modified"] for row in rows]
    assert modified[0] > modified[1] > modified[2]
    assert rows[-1]["error_modified"] < rows[-1]["error_original"]
    orders = serial.summary["observed_orders"]["euler constant mu=0.05 n=4"]["modified"]
    assert orders[-1] > 0.5
    baseline = [row["error_original"] for row in serial.tables["baseline"]]
    assert len(baseline) == 3 and baseline[0] > baseline[1] > baseline[2]
    assert len(serial.summary["baseline_orders"]) == 2


def test_small_speed_study():
    result = _run({
        "name": "small_speed", "problem": "advection", "study": "speed",
        "domain": [-0.5, 0.5], "dx": 0.01, "end_time": 1.0, "flux": "upwind", "width": 50.0,
        "schedules": [{"tableau": "heun", "form": "decay", "mu": 0.2, "target": 0.1}],
    })
    (row,) = result.tables["speed"]
    assert row["N"] == 12
    assert 0.0 < row["measured_speed"] < 1.0
    assert abs(row["measured_speed"] - row["c"]) < 0.1
    assert len(result.tables["peaks"]) == 101


def test_small_shock_study():
    result = _run({
        "name": "small_shock", "problem": "burgers", "study": "shock",
        "domain": [0.0, 1.0], "dx": 0.01, "end_time": 0.2, "initial": "triangle", "save_states": True,
        "schedules": [
            {"tableau": "euler", "form": "constant", "mu": 0.25, "n": 1},
            {"tableau": "euler", "form": "constant", "mu": 0.25, "n": 12},
        ],
    })
    rows = result.tables["shock"]
    for row in rows:
        assert abs(row["measured_location"] - row["predicted_location"]) < 0.03
    # too few pseudo steps slow the shock down
    assert rows[0]["measured_location"] < rows[1]["measured_location"]
    assert "state_1" in result.tables and "state_2" in result.tables


def test_small_strategies_study():
    result = _run({
        "name": "small_strategies", "problem": "burgers", "study": "strategies",
        "domain": [0.0, 1.0], "dx": 0.01, "end_time": 0.02, "initial": "triangle",
        "schedules": [
            {"label": "Strategy 1", "tableau": "euler", "form": "constant", "mu": 0.25, "n": 12},
            {"label": "Strategy 2", "tableau": "euler", "form": "root_first", "mu": 0.25, "n": 8},
        ],
    })
    rows = {row["schedule"]: row for row in result.tables["strategies"]}
    assert rows["Strategy 2"]["c"] == 1.0
    assert rows["Strategy 2"]["first_iterate_residual"] < rows["Strategy 1"]["first_iterate_residual"]
    assert rows["Strategy 1"]["pseudo_time"] == rows["Strategy 2"]["pseudo_time"]
    for ledger in result.ledgers:
        assert ledger.conserved(), ledger.name


def test_small_vortex_study():
    result = _run({
        "name": "small_vortex", "problem": "euler_vortex", "study": "vortex",
        "domain": [-5.0, 15.0], "y_domain": [-5.0, 5.0], "dx": 1.0, "dt_ratio": 0.25, "end_time": 1.0,
        "initial": "vortex",
        "schedules": [{"tableau": "euler", "form": "constant", "mu": 0.2, "n": 9}],
    })
    (row,) = result.tables["vortex"]
    assert abs(row["predicted_x"] - row["c"]) < 1e-15
    assert row["density_drift"] < 1e-11 * 200
    assert np.isfinite(row["error_modified"])
    residuals = result.tables["residuals"]
    # nine pseudo steps per physical step, four physical steps
    assert len(residuals) == 4 * 10
    assert sorted({row["step"] for row in residuals}) == [1, 2, 3, 4]


def test_dense_limit_is_enforced():
    try:
        _run({
            "name": "too_big", "problem": "advection", "study": "conservation", "domain": [0.0, 1.0],
            "m": 4096, "end_time": 0.001, "solvers": [{"inner": "exact"}],
        })
    except SpecValidationError as e:
        assert "max_dense_cells" in e.message
    else:
        raise AssertionError("dense Newton solves above the limit must be refused")


def test_unstable_jacobi_march_reports_divergence():
    grid = Grid1D(-1.5, 1.5, 48)
    semi = SemiDiscretization(grid, CENTRAL)
    # five Jacobi sweeps amplify the mode cos(πj/2) by √2 per step at Δt = Δx
    u0 = 1e-3 * np.cos(0.5 * np.pi * np.arange(48))
    cfg = NewtonConfig(inner="jacobi", inner_iterations=5)
    try:
        march(semi, u0, grid.dx, 200, newton_stepper(cfg), "J")
    except SolverDivergenceError as e:
        assert "grew beyond" in e.message
    else:
        raise AssertionError("unbounded growth must be reported as divergence")
    # and damp it at half that step
    u = march(semi, u0, 0.5 * grid.dx, 200, newton_stepper(cfg), "J")
    assert np.max(np.abs(u)) < 1e-6


def test_solver_defaults_come_from_settings():
    settings = WorkbenchSettings.model_validate({"solvers": {"gmres_breakdown_tol": 1e-9, "richardson_theta": 0.3}})
    resolved = _resolved_solver(SolverSpec(inner="gmres"), settings)
    assert resolved.gmres_breakdown_tol == 1e-9 and resolved.theta == 0.3
    explicit = _resolved_solver(SolverSpec(inner="gmres", gmres_breakdown_tol=1e-3, theta=0.7), settings)
    assert explicit.gmres_breakdown_tol == 1e-3 and explicit.theta == 0.7


def test_small_burgers_convergence_study():
    result = _run({
        "name": "small_burgers_convergence", "problem": "burgers", "study": "convergence",
        "domain": [0.0, 1.0], "dx": 0.02, "end_time": 0.5, "initial": "triangle", "refinements": [0, 1, 2],
        "schedules": [{"label": "N=3", "tableau": "euler", "form": "constant", "mu": 0.25, "n": 3}],
    })
    rows = result.tables["convergence"]
    modified = [row["error_modified"] for row in rows]
    assert modified[0] > modified[1] > modified[2]
    assert rows[-1]["error_original"] > rows[-1]["error_modified"]
    assert "baseline" not in result.tables


def test_small_vortex_convergence_study():
    result = _run({
        "name": "small_vortex_convergence", "problem": "euler_vortex", "study": "convergence",
        "domain": [-5.0, 15.0], "y_domain": [-5.0, 5.0], "dx": 2.0, "dt_ratio": 0.25, "end_time": 0.5,
        "initial": "vortex", "refinements": [0, 1],
        "schedules": [{"label": "Strategy 1", "tableau": "euler", "form": "constant", "mu": 0.2, "n": 9}],
    })
    rows = result.tables["convergence"]
    assert [row["m"] for row in rows] == [50, 200]
    assert all(np.isfinite(row["error_modified"]) and np.isfinite(row["error_original"]) for row in rows)
    assert len(result.summary["observed_orders"]["Strategy 1"]["modified"]) == 1


def main():
    return run_suite("Experiment Driver Tests", [
        ("Table 1 advection", test_table1_advection_rows),
        ("Table 1 Burgers", test_table1_burgers_rows),
        ("Table 2 constants", test_table2_constants),
        ("Time steps", test_time_steps_land_on_end_time),
        ("Step inflow", test_step_inflow_is_pinned),
        ("Conservation study", test_small_conservation_study),
        ("Convergence study", test_small_convergence_study_in_parallel),
        ("Speed study", test_small_speed_study),
        ("Shock study", test_small_shock_study),
        ("Strategies study", test_small_strategies_study),
        ("Vortex study", test_small_vortex_study),
        ("Dense limit", test_dense_limit_is_enforced),
        ("Jacobi growth is divergence", test_unstable_jacobi_march_reports_divergence),
        ("Solver defaults from settings", test_solver_defaults_come_from_settings),
        ("Burgers convergence study", test_small_burgers_convergence_study),
        ("Vortex convergence study", test_small_vortex_convergence_study),
    ])


if __name__ == "__main__":
    exit_with(main())
