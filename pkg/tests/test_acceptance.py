"""End-to-end acceptance checks on the bundled quartic scenarios.

Each test prints one ``CRITERION n ...: PASS|FAIL`` line and then asserts.
The 1D ladder and the 2D pair are computed once per module (about three
minutes in total).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import pytest
from click.testing import CliRunner
from scipy.integrate import quad
from scipy.sparse.csgraph import dijkstra

from ptwell.agmon import agmon_graph, decay_envelope_check
from ptwell.cli import build_problem, main, run_bifurcation, slope_fit
from ptwell.config import load
from ptwell.grid import Grid
from ptwell.problem import BoxTooSmallWarning
from ptwell.spectra import RieszProjector, projector_rank

pytestmark = pytest.mark.slow


@dataclass
class Study:
    scenario: str
    h: float
    separation: float
    abs_t: float
    weight: float
    scale: float
    report: object
    envelope: float
    envelope_slack: float
    outside_mass: float
    idempotency: list
    rank: int
    doubling: float
    im_a_slopes: list


def study(cfg, h):
    with warnings.catch_warnings():
        # the 2D box is smaller than 2*S0 in Agmon distance; recorded, not fatal
        warnings.simplefilter("ignore", BoxTooSmallWarning)
        p = build_problem(cfg, h)
    report = run_bifurcation(cfg, p)
    grid = p.grid

    e1 = grid.extend(p.reference.e_tilde[0])
    env = decay_envelope_check(e1, p.fields[1], h, p.delta)
    far = p.fields[1].values >= p.separation / 2
    mass = np.abs(e1) ** 2
    outside = float(mass[far].sum() / mass.sum())

    eps_probe = 0.5 * report.epsilon_plus_located
    op = p.operator(eps_probe)
    proj = p.projector(eps_probe)
    idem = [proj.idempotency_residual(seed=s) for s in range(8)]
    rank = projector_rank(op, p.window, probes=8, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    R = rng.standard_normal((op.size, 4)) + 1j * rng.standard_normal((op.size, 4))
    coarse = proj.apply(R)
    p.clear_cache()
    fine = RieszProjector(op, p.window.with_nodes(2 * p.window.contour_nodes)).apply(R)
    doubling = float(np.linalg.norm(fine - coarse) / np.linalg.norm(R))

    slopes = []
    for frac in (0.1, 0.2):
        eps = frac * report.epsilon_plus_located
        slopes.append(float(np.imag(p.model(eps).a) / eps))
    p.clear_cache()
    return Study(cfg.name, h, p.separation, abs(p.t), p.weight, p.scale, report,
                 env.statistic, env.slack, outside, idem, rank, doubling, slopes)


@pytest.fixture(scope="module")
def cfg1d():
    return load("quartic_1d")


@pytest.fixture(scope="module")
def cfg2d():
    return load("quartic_2d")


@pytest.fixture(scope="module")
def ladder1d(cfg1d):
    return [study(cfg1d, h) for h in cfg1d.ladder]


@pytest.fixture(scope="module")
def ladder2d(cfg2d):
    return [study(cfg2d, h) for h in cfg2d.ladder]


@pytest.fixture(scope="module")
def studies(ladder1d, ladder2d):
    return ladder1d + ladder2d


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number:>2} {title}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def label(s):
    return f"{s.scenario}@h={s.h:g}"


def test_criterion_01_subspace_exactness(studies, verdict):
    worst = {label(s): max(r.subspace_error for r in s.report.rows) for s in studies}
    top = max(worst.values())
    verdict(1, "subspace exactness", top <= 1e-7,
            f"max relative error {top:.2e} <= 1e-7 over {len(studies)} runs")


def test_criterion_02_pt_pairing(studies, verdict):
    top = max(r.pairing_error for s in studies for r in s.report.rows)
    verdict(2, "PT pairing", top <= 1e-10, f"max pairing residual/scale {top:.2e} <= 1e-10")


def test_criterion_03_matrix_structure(studies, verdict):
    top = max(r.structure_error for s in studies for r in s.report.rows)
    herm = [f for s in studies for f in s.report.failures if "Hermitian" in f]
    verdict(3, "M structure", top <= 1e-8 and not herm,
            f"max symmetry residual/scale {top:.2e} <= 1e-8; M_0 failures {len(herm)}")


def test_criterion_04_trichotomy(studies, verdict):
    codes, agree = [], []
    for s in studies:
        code = "".join({"real-distinct": "R", "collision": "C", "complex-pair": "X"}[v]
                       for v in s.report.verdicts)
        codes.append(code)
        r = s.report
        agree.append(abs(r.epsilon_plus_direct - r.epsilon_plus_located) / r.epsilon_plus_located)
    import re

    shape = all(re.fullmatch(r"R+C?X+", c) and c.count("C") <= 1 for c in codes)
    collided = all(not any("coalesce" in f for f in s.report.failures) for s in studies)
    ok = shape and collided and max(agree) <= 1e-3
    verdict(4, "trichotomy", ok,
            f"sequences {codes}; max threshold disagreement {max(agree):.2e} <= 1e-3")


def test_criterion_05_threshold_formula(ladder1d, verdict):
    rel = [abs(s.report.epsilon_plus_predicted - s.report.epsilon_plus_located)
           / s.report.epsilon_plus_located for s in ladder1d]
    at025 = rel[[s.h for s in ladder1d].index(0.25)]
    monotone = all(b <= a + 0.02 for a, b in zip(rel, rel[1:]))
    verdict(5, "threshold formula", at025 <= 0.1 and monotone,
            f"relative gap by h {[round(v, 5) for v in rel]}; at h=0.25 {at025:.4f} <= 0.1")


def test_criterion_06_tunneling_rate(ladder1d, verdict):
    slope, _ = slope_fit([s.h for s in ladder1d], [s.abs_t for s in ladder1d])
    s0 = ladder1d[-1].separation
    ok = -1.15 * s0 <= slope <= -0.85 * s0
    verdict(6, "tunneling asymptotics", ok,
            f"slope {slope:.4f} in [{-1.15 * s0:.4f}, {-0.85 * s0:.4f}] (ratio {-slope / s0:.3f})")


def test_criterion_07_agmon_distance(cfg1d, cfg2d, ladder1d, verdict):
    oracle, _ = quad(lambda x: abs(x * x - 1.0), -1.0, 1.0, points=[0.0], epsabs=1e-13)
    s0 = ladder1d[0].separation
    close = abs(s0 - oracle) / oracle
    violations = 0
    rng = np.random.default_rng(cfg1d.seed)
    for cfg in (cfg1d, cfg2d):
        grid = cfg.grid()
        graph = agmon_graph(grid, cfg.potential().v0_on(grid))
        pool = rng.choice(grid.size, 40, replace=False)
        dist = dijkstra(graph, directed=False, indices=pool)
        for _ in range(1000):
            ia, ib = rng.choice(len(pool), 2, replace=False)
            c = rng.integers(grid.size)
            lhs = dist[ia, c]
            rhs = dist[ia, pool[ib]] + dist[ib, c]
            violations += int(lhs > rhs * (1 + 1e-12))
    verdict(7, "Agmon distance", close <= 0.01 and violations == 0,
            f"S0 {s0:.6f} vs oracle {oracle:.6f} (rel {close:.1e}); "
            f"triangle violations {violations}/2000")


def test_criterion_08_decay_envelopes(ladder1d, verdict):
    stats = [s.envelope for s in ladder1d]
    bounded = all(s.envelope <= s.envelope_slack for s in ladder1d)
    nonincreasing = all(b <= a for a, b in zip(stats, stats[1:]))
    mass_ok = all(s.outside_mass <= np.exp(-s.separation / (4 * s.h)) for s in ladder1d)
    masses = [f"{s.outside_mass:.1e}<={np.exp(-s.separation / (4 * s.h)):.1e}" for s in ladder1d]
    verdict(8, "decay envelopes", bounded and nonincreasing and mass_ok,
            f"E by h {[round(v, 3) for v in stats]} (bounded {bounded}, non-increasing "
            f"{nonincreasing}); outside mass {masses}")


def test_criterion_09_riesz_projector(studies, verdict):
    idem = max(max(s.idempotency) for s in studies)
    ranks = [s.rank for s in studies]
    doubling = max(s.doubling for s in studies)
    ok = idem <= 1e-8 and all(r == 2 for r in ranks) and doubling <= 1e-10
    verdict(9, "Riesz projector", ok,
            f"idempotency {idem:.1e} <= 1e-8; ranks {ranks}; 32->64 nodes change {doubling:.1e}")


def test_criterion_10_perturbation_derivative(studies, verdict):
    worst_slope, worst_flat = 0.0, 0.0
    for s in studies:
        for slope in s.im_a_slopes:
            worst_slope = max(worst_slope, abs(slope - s.weight) / s.weight)
        t = s.report.t
        drift = max(abs(r.b - t) for r in s.report.rows)
        span = max(abs(r.a.imag) for r in s.report.rows)
        worst_flat = max(worst_flat, drift / span)
    ok = worst_slope <= 0.05 and worst_flat <= 0.1
    verdict(10, "perturbation derivative", ok,
            f"d Im a / d eps vs I_W rel {worst_slope:.2e} <= 0.05; "
            f"max|b - t| / max|Im a| {worst_flat:.2e} <= 0.1")


def test_criterion_11_conjugation_symmetry(studies, verdict):
    counts = [len(s.report.conjugation_checks) for s in studies]
    top = max(c[1] for s in studies for c in s.report.conjugation_checks)
    ok = all(c == 3 for c in counts) and top <= 1e-10
    verdict(11, "conjugation symmetry", ok, f"samples {counts}; max set distance {top:.1e} <= 1e-10")


def test_criterion_12_reproducibility(tmp_path, verdict):
    bodies = []
    for run in ("first", "second"):
        out = tmp_path / run
        res = CliRunner().invoke(main, ["bifurcate", "--config", "quartic_1d", "--out", str(out)])
        assert res.exit_code == 0, res.output
        bodies.append((out / "bifurcate.csv").read_bytes())
    same = bodies[0] == bodies[1]
    verdict(12, "reproducibility", same,
            f"bifurcate.csv {len(bodies[0])} bytes, identical {same}")


def test_reference_grids_meet_minimum_resolution(cfg1d, cfg2d):
    assert cfg1d.nodes[0] >= 1200
    assert cfg2d.nodes[0] >= 200 and cfg2d.nodes[1] >= 130
    assert list(cfg1d.ladder) == [0.4, 0.3, 0.25, 0.2]
    assert list(cfg2d.ladder) == [0.4, 0.3]
    assert isinstance(cfg1d.grid(), Grid)
