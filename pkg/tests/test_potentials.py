import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwell.agmon import agmon_distance_field, agmon_graph, well_separation
from ptwell.errors import BallsOverlap, GridNotInvariant, WellCountMismatch
from ptwell.grid import Grid
from ptwell.potentials import (
    build_fill,
    locate_wells,
    plateau,
    quartic_1d,
    quartic_2d,
    tabulated,
    validate_symmetry,
)

from conftest import custom_1d


def test_quartic_symmetry_exact(grid601):
    rep = validate_symmetry(quartic_1d(), grid601)
    assert rep.involution_residual == 0
    assert rep.v0_residual == 0
    assert rep.w_residual == 0
    assert rep.passed


def test_even_perturbation_breaks_antisymmetry(grid601):
    spec = custom_1d(lambda x: (x * x - 1) ** 2, w=lambda x: x * x)
    rep = validate_symmetry(spec, grid601)
    assert rep.w_residual == pytest.approx(2 * 9.0)
    assert not rep.passed


def test_quartic_2d_symmetry_exact():
    g = Grid(((-3.0, 3.0), (-2.0, 2.0)), (61, 41))
    rep = validate_symmetry(quartic_2d(), g)
    assert rep.v0_residual == 0 and rep.w_residual == 0 and rep.passed


def test_grid_off_center_rejected():
    g = Grid(((-3.0, 2.5),), (101,))
    with pytest.raises(GridNotInvariant):
        validate_symmetry(quartic_1d(), g)


def test_shifted_quartic_wells_are_intervals():
    g = Grid(((-3.0, 3.0),), (600,))
    spec = quartic_1d(offset=0.25)
    wells = locate_wells(spec, g)
    x = g.points[:, 0]
    v = (x * x - 1) ** 2 - 0.25
    np.testing.assert_array_equal(wells.plus.cells, np.flatnonzero((v <= 0) & (x > 0)))
    np.testing.assert_array_equal(wells.minus.cells, np.flatnonzero((v <= 0) & (x < 0)))
    assert np.all(np.diff(wells.plus.cells) == 1)


def test_touching_quartic_wells_are_single_cells():
    g = Grid(((-3.0, 3.0),), (600,))
    wells = locate_wells(quartic_1d(), g)
    x = g.points[:, 0]
    assert list(wells.plus.cells) == [int(np.argmin(np.abs(x - 1)))]
    assert list(wells.minus.cells) == [int(np.argmin(np.abs(x + 1)))]


def test_positive_potential_has_no_wells(grid601):
    with pytest.raises(WellCountMismatch):
        locate_wells(custom_1d(lambda x: x * x + 1), grid601)


def _fields(spec, grid):
    v0 = spec.v0_on(grid)
    wells = locate_wells(spec, grid, v0)
    g = agmon_graph(grid, v0)
    fields = {j: agmon_distance_field(grid, v0, wells.by_label(j), g) for j in (1, -1)}
    return v0, wells, fields


def test_fill_cutoffs(grid601):
    spec = quartic_1d()
    v0, wells, fields = _fields(spec, grid601)
    fill = build_fill(spec, grid601, wells, fields, 0.2, v0)
    assert fill.fill_strength >= 1
    for j in (1, -1):
        chi = fill.chi[j]
        assert np.all(fields[j].values[chi > 0] < 0.2)
        assert chi[wells.by_label(j).representative] == 1.0
    # the filled potential keeps exactly the unfilled well
    filled = fill.filled_potential(v0, 1)
    assert filled[wells.minus.representative] > 0


def test_large_cutoff_overlaps(grid601):
    spec = quartic_1d()
    v0, wells, fields = _fields(spec, grid601)
    s0 = well_separation(fields[1], wells)
    with pytest.raises(BallsOverlap):
        build_fill(spec, grid601, wells, fields, s0 / 2, v0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 2.0), st.lists(st.floats(0.0, 5.0), min_size=2, max_size=20))
def test_plateau_bounds_and_monotone(delta, d):
    d = np.sort(np.asarray(d))
    chi = plateau(d, delta)
    assert np.all((chi >= 0) & (chi <= 1))
    assert np.all(np.diff(chi) <= 1e-15)
    assert np.all(chi[d < delta / 3] == 1)
    assert np.all(chi[d > delta] == 0)


def test_tabulated_matches_analytic(tmp_path, grid601):
    x = np.linspace(-3, 3, 1201)
    path = tmp_path / "quartic.csv"
    with path.open("w") as fh:
        fh.write("x,v0,w\n")
        for xi in x:
            xi = float(xi)
            fh.write(f"{xi!r},{(xi * xi - 1) ** 2!r},{xi!r}\n")
    spec = tabulated(path)
    np.testing.assert_allclose(spec.v0_on(grid601), quartic_1d().v0_on(grid601), atol=1e-4)
    np.testing.assert_allclose(spec.w_on(grid601), grid601.points[:, 0], atol=1e-12)
