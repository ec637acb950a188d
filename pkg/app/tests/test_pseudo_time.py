#!/usr/bin/env python3
"""
Pseudo-time tests: tableaus, stability functions, modification constants,
schedules, and the flux form of truncated pseudo-time iterations.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

import numpy as np

from app.conserva_errors import NoRealRootError, ScheduleError, TableauError
from app.flux import BURGERS_UPWIND, CENTRAL, UPWIND
from app.grid_state import Grid1D, total_mass
from app.pseudo_time import (
    BUILTIN_TABLEAUS, EULER, HEUN, SSPRK3, ButcherTableau, PseudoSchedule, decay_schedule, flux_form_residual,
    geometric_schedule, h_flux_oracle, modification_constant, pseudo_iterate, pseudo_solve, root_first_schedule,
    stability_function, stability_root, stage_weights,
)
from app.semidisc import ImplicitEulerSystem, SemiDiscretization
from app.tableau_registry import load_tableau_file
from app.tests.harness import PROJECT_ROOT, exit_with, run_suite

TABLEAUS = (EULER, HEUN, SSPRK3)


def _system(flux=BURGERS_UPWIND, m=32, seed=0, dt_ratio=0.5):
    rng = np.random.default_rng(seed)
    grid = Grid1D(0.0, 1.0, m)
    semi = SemiDiscretization(grid, flux)
    return ImplicitEulerSystem(semi, dt_ratio * grid.dx, rng.uniform(0.1, 1.0, m)), rng


def test_tableau_validation():
    assert SSPRK3.s == 3 and HEUN.s == 2 and EULER.s == 1
    for bad in (
        dict(A=[[0.0, 1.0], [0.0, 0.0]], b=[0.5, 0.5], c=[0.0, 0.0]),
        dict(A=[[0.0, 0.0], [1.0, 0.0]], b=[0.5, 0.6], c=[0.0, 1.0]),
        dict(A=[[0.0]], b=[0.5, 0.5], c=[0.0, 1.0]),
    ):
        try:
            ButcherTableau("bad", **bad)
        except TableauError:
            continue
        raise AssertionError(f"invalid tableau accepted: {bad}")
    assert not HEUN.A.flags.writeable


def test_stability_functions():
    for mu in (0.0, 0.05, 0.25, 1.0, 2.0):
        z = -mu
        assert abs(stability_function(EULER, z) - (1 + z)) < 1e-15
        assert abs(stability_function(HEUN, z) - (1 + z + z * z / 2)) < 1e-15
        assert abs(stability_function(SSPRK3, z) - (1 + z + z * z / 2 + z ** 3 / 6)) < 1e-14
    rk4 = load_tableau_file(PROJECT_ROOT / "tableaus" / "rk4.json")
    z = -0.3
    assert abs(stability_function(rk4, z) - (1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24)) < 1e-14


def test_constant_schedule_constants():
    expected = {"euler": 0.1855, "heun": 0.1812, "ssprk3": 0.1813}
    for name, value in expected.items():
        c = modification_constant(BUILTIN_TABLEAUS[name], [0.05] * 4)
        assert abs(c - value) < 5e-5, (name, c)
    assert abs(modification_constant(EULER, [0.05] * 4) - (1 - 0.95 ** 4)) < 1e-15


def test_geometric_schedule_constants():
    expected = {"euler": 1.0, "heun": 0.7845, "ssprk3": 0.8616}
    for name, value in expected.items():
        schedule = geometric_schedule(BUILTIN_TABLEAUS[name], 4)
        assert schedule.mus == [1.0, 0.5, 0.25, 0.125]
        assert abs(schedule.c - value) < 5e-5, (name, schedule.c)


def test_other_constants():
    assert abs(modification_constant(EULER, [0.25] * 12) - 0.9683) < 5e-5
    assert abs(modification_constant(EULER, [0.2] * 9) - 0.866) < 1e-3
    assert abs(modification_constant(HEUN, [0.25] * 12) - (1 - 0.78125 ** 12)) < 1e-15
    try:
        modification_constant(EULER, [])
    except ScheduleError:
        pass
    else:
        raise AssertionError("empty schedules have no constant")


def test_stability_roots():
    assert stability_root(EULER) == 1.0
    assert stability_root(HEUN) is None
    root = stability_root(SSPRK3)
    assert abs(root - 1.5961) < 1e-3
    assert abs(stability_function(SSPRK3, -root)) < 1e-12
    assert stability_root(load_tableau_file(PROJECT_ROOT / "tableaus" / "rk4.json")) is None


def test_root_first_schedules():
    schedule = root_first_schedule(EULER, 0.25, 8)
    assert schedule.mus == [1.0] + [0.25] * 8
    assert schedule.c == 1.0
    assert schedule.pseudo_time_reached == 3.0
    assert abs(root_first_schedule(SSPRK3, 0.2, 4).c - 1.0) < 1e-12
    try:
        root_first_schedule(HEUN, 0.25, 8)
    except NoRealRootError as e:
        assert "heun" in str(e).lower()
    else:
        raise AssertionError("heun has no real root")


def test_decay_schedules():
    assert decay_schedule(HEUN, 0.05, 0.1).N == 47
    assert decay_schedule(HEUN, 0.2, 0.1).N == 12
    for tab in (HEUN, SSPRK3):
        for mu in (0.05, 0.2):
            schedule = decay_schedule(tab, mu, 0.1)
            decay = 1.0 - schedule.c
            assert decay <= 0.1
            assert decay / stability_function(tab, -mu) > 0.1
    try:
        decay_schedule(EULER, 2.5, 0.1)
    except ScheduleError:
        pass
    else:
        raise AssertionError("|phi| >= 1 never decays")


def test_schedule_validation():
    for mus in ([], [0.1, 0.0], [0.1, -1.0], [float("inf")]):
        try:
            PseudoSchedule(EULER, mus)
        except ScheduleError:
            continue
        raise AssertionError(f"schedule {mus} accepted")
    schedule = PseudoSchedule(HEUN, [0.5])
    schedule.extend([0.25, 0.25])
    schedule.append(1.0)
    assert schedule.N == len(schedule) == 4
    assert list(schedule) == [0.5, 0.25, 0.25, 1.0]
    assert schedule.pseudo_time_reached == 2.0


def test_pseudo_iterations_conserve_mass():
    sys_, _ = _system()
    u, trace = pseudo_iterate(sys_, HEUN, [0.25] * 12)
    assert trace.residual[0] == 1.0
    assert trace.residual[-1] < trace.residual[0]
    assert all(abs(e) < 1e-13 for e in trace.mass_error)
    field, _ = pseudo_solve(sys_, HEUN, PseudoSchedule(HEUN, [0.25] * 12))
    assert np.array_equal(field.scalar, u)
    assert abs(total_mass(field) - float(np.sum(sys_.grid.volumes * sys_.u_prev))) < 1e-13


def test_pseudo_solve_converges_to_implicit_euler():
    sys_, _ = _system(UPWIND, dt_ratio=1.0)
    u, trace = pseudo_iterate(sys_, EULER, root_first_schedule(EULER, 0.5, 60))
    assert np.max(np.abs(sys_.g(u))) < 1e-10
    assert trace.residual[-1] < 1e-12


def test_stage_weights():
    for tab in TABLEAUS:
        for mu in (0.05, 0.5, 1.3):
            w = stage_weights(tab, mu)
            expected = mu * tab.b @ np.linalg.inv(np.eye(tab.s) + mu * tab.A)
            assert np.allclose(w, expected, atol=1e-14)
            # the weights sum to 1 - φ(-μ)
            assert abs(np.sum(w) - (1.0 - stability_function(tab, -mu))) < 1e-14


def test_flux_form_oracle():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for tab in TABLEAUS:
        for n in range(1, 6):
            for trial in range(20):
                sys_, _ = _system(BURGERS_UPWIND, seed=int(rng.integers(1 << 30)))
                mus = list(rng.uniform(0.05, 0.6, n))
                stages = []
                u, _ = pseudo_iterate(sys_, tab, mus, stages=stages)
                h = h_flux_oracle(sys_, tab, mus, stages)
                residual = flux_form_residual(sys_, u, h)
                worst = max(worst, float(np.max(np.abs(residual))))
    assert worst <= 1e-12, worst


def test_flux_oracle_runs_its_own_solve():
    sys_, _ = _system(CENTRAL, seed=3)
    mus = [0.3, 0.2, 0.1]
    h = h_flux_oracle(sys_, SSPRK3, mus)
    u, _ = pseudo_iterate(sys_, SSPRK3, mus)
    assert np.max(np.abs(flux_form_residual(sys_, u, h))) <= 1e-12
    try:
        h_flux_oracle(sys_, SSPRK3, mus, stages=[])
    except ScheduleError:
        pass
    else:
        raise AssertionError("stage blocks must match the schedule")


def test_oracle_flux_on_constant_states():
    rng = np.random.default_rng(99)
    grid = Grid1D(0.0, 1.0, 16)
    for flux in (UPWIND, BURGERS_UPWIND, CENTRAL):
        semi = SemiDiscretization(grid, flux)
        for tab in TABLEAUS:
            for _ in range(5):
                value = float(rng.uniform(-2.0, 2.0))
                sys_ = ImplicitEulerSystem(semi, grid.dx, np.full(16, value))
                mus = list(rng.uniform(0.05, 1.0, int(rng.integers(1, 6))))
                (h,) = h_flux_oracle(sys_, tab, mus)
                c = modification_constant(tab, mus)
                assert np.max(np.abs(h - c * flux.physical(value))) < 1e-13


def test_windowed_mass_change_equals_boundary_fluxes():
    """Over any block of cells the mass change is Δt times the oracle flux entering minus leaving"""
    rng = np.random.default_rng(7)
    for tab in TABLEAUS:
        sys_, _ = _system(BURGERS_UPWIND, seed=11)
        mus = list(rng.uniform(0.1, 0.8, 4))
        stages = []
        u, _ = pseudo_iterate(sys_, tab, mus, stages=stages)
        (h,) = h_flux_oracle(sys_, tab, mus, stages)
        dx, dt = sys_.grid.dx, sys_.dt
        change = dx * (u - sys_.u_prev)
        # h[i] sits on the right face of cell i
        for first, last in ((0, 31), (3, 9), (10, 25), (17, 17)):
            window = float(np.sum(change[first:last + 1]))
            entering = h[first - 1] if first > 0 else h[-1]
            assert abs(window - dt * (entering - h[last])) < 1e-13, (tab.name, first, last)
        assert abs(float(np.sum(change))) < 1e-13


def test_oracle_refuses_empty_schedule():
    sys_, _ = _system(CENTRAL, seed=5)
    try:
        h_flux_oracle(sys_, HEUN, [])
    except ScheduleError as e:
        assert "empty schedule" in str(e)
    else:
        raise AssertionError("an empty schedule has no flux form")


def test_pseudo_solve_starts_from_previous_state():
    sys_, _ = _system(UPWIND, seed=8)
    start = sys_.semi.field(sys_.u_prev)
    field, _ = pseudo_solve(sys_, EULER, [0.5, 0.5], u0=start)
    expected, _ = pseudo_iterate(sys_, EULER, [0.5, 0.5])
    assert np.array_equal(field.scalar, expected)
    try:
        pseudo_solve(sys_, EULER, [0.5, 0.5], u0=sys_.semi.field(sys_.u_prev + 0.1))
    except ScheduleError as e:
        assert "pseudo_iterate" in str(e)
    else:
        raise AssertionError("pseudo_solve must start from u^n")


def main():
    return run_suite("Pseudo-Time Tests", [
        ("Tableau validation", test_tableau_validation),
        ("Stability functions", test_stability_functions),
        ("Constant schedule constants", test_constant_schedule_constants),
        ("Geometric schedule constants", test_geometric_schedule_constants),
        ("Other constants", test_other_constants),
        ("Stability roots", test_stability_roots),
        ("Root-first schedules", test_root_first_schedules),
        ("Decay schedules", test_decay_schedules),
        ("Schedule validation", test_schedule_validation),
        ("Pseudo iterations conserve mass", test_pseudo_iterations_conserve_mass),
        ("Convergence to implicit Euler", test_pseudo_solve_converges_to_implicit_euler),
        ("Stage weights", test_stage_weights),
        ("Flux form oracle", test_flux_form_oracle),
        ("Oracle without recorded stages", test_flux_oracle_runs_its_own_solve),
        ("Oracle flux on constant states", test_oracle_flux_on_constant_states),
        ("Windowed mass change", test_windowed_mass_change_equals_boundary_fluxes),
        ("Oracle refuses empty schedule", test_oracle_refuses_empty_schedule),
        ("Pseudo solve starts from u^n", test_pseudo_solve_starts_from_previous_state),
    ])


if __name__ == "__main__":
    exit_with(main())
