#!/usr/bin/env python3
"""
Grid and state tests: cell geometry, the mass functional and index wrap.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

import numpy as np

from app.conserva_errors import ComponentRangeError, ConservaError, GridMismatchError
from app.grid_state import Grid1D, Grid2D, StateField, mass_error, sample, state_rows, total_mass
from app.tests.harness import exit_with, run_suite


def test_grid_geometry():
    grid = Grid1D(-1.5, 1.5, 6)
    assert grid.dx == 0.5
    assert np.allclose(grid.points, [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0])
    assert np.allclose(grid.centers, grid.points + 0.25)
    assert np.allclose(grid.volumes, 0.5)
    assert Grid1D.with_spacing(-0.2, 0.2, 0.003).m == 133


def test_invalid_grids_raise():
    for args in ((0.0, 1.0, 0), (1.0, 1.0, 4)):
        try:
            Grid1D(*args)
        except ConservaError:
            continue
        raise AssertionError(f"Grid1D{args} should be rejected")
    try:
        Grid1D(0.0, 1.0, 5).coarsen()
    except ConservaError:
        pass
    else:
        raise AssertionError("odd grids cannot be agglomerated")
    assert Grid1D(0.0, 1.0, 6).coarsen().m == 3


def test_mass_of_constant_and_zero():
    grid = Grid1D(-1.5, 1.5, 6)
    assert total_mass(StateField(grid, np.zeros(6))) == 0.0
    assert abs(total_mass(StateField(grid, np.ones(6))) - 3.0) < 1e-15


def test_mass_of_sampled_pulse():
    grid = Grid1D(-1.5, 1.5, 6)
    u = sample(lambda x: np.exp(-50.0 * x ** 2), grid)
    expected = 0.5 * (1.0 + 2.0 * math.exp(-12.5) + 2.0 * math.exp(-50.0) + math.exp(-112.5))
    assert abs(total_mass(u) - expected) < 1e-15


def test_mass_is_linear():
    rng = np.random.default_rng(7)
    grid = Grid1D(0.0, 2.0, 40)
    for _ in range(20):
        a, b = rng.normal(size=2)
        u, v = rng.normal(size=(2, 40))
        combined = total_mass(StateField(grid, a * u + b * v))
        separate = a * total_mass(StateField(grid, u)) + b * total_mass(StateField(grid, v))
        assert abs(combined - separate) < 1e-12


def test_mass_error_checks_grids():
    grid = Grid1D(0.0, 1.0, 4)
    u = StateField(grid, [1.0, 2.0, 3.0, 4.0])
    assert mass_error(u, u) == 0.0
    assert abs(mass_error(u, StateField(grid, np.ones(4))) - 1.5) < 1e-15
    try:
        mass_error(u, StateField(Grid1D(0.0, 1.0, 8), np.ones(8)))
    except GridMismatchError:
        pass
    else:
        raise AssertionError("grid mismatch must raise")


def test_state_field_is_immutable_and_finite():
    grid = Grid1D(0.0, 1.0, 3)
    u = StateField(grid, [1.0, 2.0, 3.0])
    assert not u.values.flags.writeable
    try:
        StateField(grid, [1.0, float("nan"), 0.0])
    except ConservaError:
        pass
    else:
        raise AssertionError("non-finite values must be rejected")
    try:
        u.component(1)
    except ComponentRangeError:
        pass
    else:
        raise AssertionError("component 1 of a scalar field is out of range")


def test_index_wrap():
    grid = Grid1D(0.0, 1.0, 5)
    u = StateField(grid, np.arange(5.0))
    for i in range(5):
        assert u.at(i + 5) == u.at(i)
        assert u.at(i - 5) == u.at(i)
    grid2 = Grid2D((0.0, 2.0), (0.0, 1.0), 4, 2)
    v = StateField(grid2, np.arange(8.0).reshape(4, 2))
    assert np.array_equal(v.at(5, 3), v.at(1, 1))


def test_2d_sampling_and_rows():
    grid = Grid2D.with_spacing((-5.0, 15.0), (-5.0, 5.0), 0.4)
    assert (grid.mx, grid.my) == (50, 25)
    u = sample(lambda x, y: np.stack([x, y], axis=-1), grid, component_names=("a", "b"))
    assert u.q == 2
    assert total_mass(u, 0) == float(np.sum(grid.volumes * u.component(0)))
    rows = state_rows(u)
    assert len(rows) == 50 * 25
    assert set(rows[0]) == {"x", "y", "a", "b"}
    assert rows[0]["a"] == -5.0 and rows[0]["b"] == -5.0


def main():
    return run_suite("Grid and State Tests", [
        ("Grid geometry", test_grid_geometry),
        ("Invalid grids", test_invalid_grids_raise),
        ("Mass of constant and zero", test_mass_of_constant_and_zero),
        ("Mass of sampled pulse", test_mass_of_sampled_pulse),
        ("Mass linearity", test_mass_is_linear),
        ("Mass error grid check", test_mass_error_checks_grids),
        ("Immutable finite state", test_state_field_is_immutable_and_finite),
        ("Index wrap", test_index_wrap),
        ("2D sampling and rows", test_2d_sampling_and_rows),
    ])


if __name__ == "__main__":
    exit_with(main())
