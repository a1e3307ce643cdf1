import numpy as np
import pytest
import scipy.linalg as sla

from ptwell.errors import WindowInvalid
from ptwell.grid import Grid
from ptwell.operator import (
    assemble,
    assemble_reference,
    check_window,
    essential_threshold,
    export_coo,
    load_coo,
    permutation_matrix,
    pt_residual,
)
from ptwell.potentials import FillSpec, quartic_1d, quartic_2d

from conftest import custom_1d


def test_free_dirichlet_ground_state():
    L, n, h = 2.0, 201, 0.3
    spec = custom_1d(lambda x: 0 * x, w=lambda x: 0 * x, extent=L / 2, center=L / 2)
    grid = Grid(((0.0, L),), (n,))
    op = assemble(grid, spec, h)
    d = grid.spacing[0]
    lowest = sla.eigvalsh(op.entries.toarray().real)[:3]
    k = np.arange(1, 4)
    oracle = 4 * h * h / d**2 * np.sin(k * np.pi * d / (2 * L)) ** 2
    np.testing.assert_allclose(lowest, oracle, rtol=1e-10)
    assert oracle[0] == pytest.approx(h * h * np.pi**2 / L**2, rel=1e-4)


def test_unperturbed_matrix_real_symmetric(grid601):
    A = assemble(grid601, quartic_1d(), 0.3).entries
    assert np.all(A.data.imag == 0)
    assert abs(A - A.T).max() == 0


def test_constant_perturbation_shifts_spectrum():
    grid = Grid(((-3.0, 3.0),), (81,))
    spec = custom_1d(lambda x: (x * x - 1) ** 2, w=lambda x: 1 + 0 * x)
    eps = 0.37
    base = np.sort(sla.eigvalsh(assemble(grid, spec, 0.3).entries.toarray().real))
    shifted = sla.eigvals(assemble(grid, spec, 0.3, eps).entries.toarray())
    shifted = shifted[np.argsort(shifted.real)]
    np.testing.assert_allclose(shifted, base + 1j * eps, atol=1e-10)


@pytest.mark.parametrize("eps", [0.0, 0.1, -0.4])
def test_pt_relation_exact(grid601, eps):
    assert pt_residual(assemble(grid601, quartic_1d(), 0.3, eps)) == 0.0


def test_pt_relation_2d():
    g = Grid(((-3.0, 3.0), (-2.0, 2.0)), (31, 21))
    assert pt_residual(assemble(g, quartic_2d(), 0.4, 0.2)) == 0.0


def test_reference_operators_exchanged(problem_h025):
    p = problem_h025
    S = permutation_matrix(p.P0.parity)
    other = assemble_reference(p.grid, p.spec, p.fill, p.h, -1, p.v0)
    assert abs(S @ p.reference_op.base @ S - other.base).max() == 0


def test_zero_fill_is_unperturbed(grid601):
    spec = quartic_1d()
    zero = np.zeros(grid601.size)
    fill = FillSpec(0.1, 2.0, {1: zero, -1: zero})
    ref = assemble_reference(grid601, spec, fill, 0.3, 1)
    assert abs(ref.base - assemble(grid601, spec, 0.3).base).max() == 0


def test_essential_threshold_quartic(grid601):
    assert essential_threshold(quartic_1d(), grid601) == pytest.approx(64.0)


def test_small_box_threshold_rejects_window():
    spec = quartic_1d(extent=1.2)
    grid = Grid(((-1.2, 1.2),), (241,))
    thr = essential_threshold(spec, grid)
    assert thr == pytest.approx((1.44 - 1) ** 2)
    with pytest.raises(WindowInvalid):
        check_window(0.0, 0.2, thr)
    check_window(0.0, 0.19, thr)


def test_plateau_potential_threshold():
    spec = custom_1d(lambda x: np.minimum((x * x - 1) ** 2, 3.0))
    grid = Grid(((-3.0, 3.0),), (121,))
    assert essential_threshold(spec, grid) == 3.0


def test_coo_roundtrip(tmp_path, grid601):
    op = assemble(grid601, quartic_1d(), 0.3, 0.05)
    path = export_coo(op, tmp_path / "p.coo")
    assert path.read_text().startswith("# n=599")
    assert abs(load_coo(path) - op.entries).max() == 0
