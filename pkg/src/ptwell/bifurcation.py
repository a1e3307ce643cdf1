"""Threshold of PT-symmetry breaking: prediction, location and sweeps."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from ptwell.errors import BracketInvalid, EpsilonTooLarge, NonPositiveWeight
from ptwell.spectra import SpectralWindow, eigs_window

REAL, COLLISION, COMPLEX = "real-distinct", "collision", "complex-pair"


class Discriminant(NamedTuple):
    value: float
    plus_factor: float
    f: float


def discriminant(model) -> Discriminant:
    """``|b|^2 - (Im a)^2`` and its factors ``|b| + Im a`` and ``f = |b| - Im a``."""
    b = abs(model.b)
    im_a = float(np.imag(model.a))
    return Discriminant(b * b - im_a * im_a, b + im_a, b - im_a)


def predict_threshold(t: complex, weight: float) -> float:
    """Leading-order threshold ``|t| / int W |e_1|^2``."""
    if not weight > 0:
        raise NonPositiveWeight(f"weight integral {weight!r} is not positive")
    return abs(t) / weight


def _root(fn: Callable[[float], float], lo: float, hi: float, tol: float, what: str) -> float:
    """Root of ``fn`` bracketed by ``fn(lo) > 0 > fn(hi)``, to relative ``tol``."""
    f_lo, f_hi = fn(lo), fn(hi)
    if not (f_lo > 0 > f_hi):
        raise BracketInvalid(
            f"{what} does not change sign on [{lo:.6g}, {hi:.6g}] ({f_lo:.3g}, {f_hi:.3g})"
        )
    return float(brentq(fn, lo, hi, xtol=0.25 * tol * lo, rtol=4 * np.finfo(float).eps))


def locate_threshold(builder: Callable, bracket: tuple[float, float], tol: float = 1e-4) -> float:
    """Sign change of ``f = |b| - Im a`` of the reduced model."""
    lo, hi = map(float, bracket)
    return _root(lambda e: discriminant(builder(e)).f, lo, hi, tol, "f = |b| - Im a")


def pair_discriminant(values) -> float:
    """``((l1 - l2) / 2)^2`` for two eigenvalues closed under conjugation.

    Positive for a real pair, ``-(Im l)^2`` for a conjugate pair; equal to
    ``|b|^2 - (Im a)^2`` when the pair is the doublet.
    """
    if len(values) != 2:
        raise EpsilonTooLarge(f"window holds {len(values)} eigenvalues, expected 2")
    d = 0.5 * (values[0] - values[1])
    return float((d * d).real)


def locate_threshold_direct(op_builder: Callable, window: SpectralWindow,
                            bracket: tuple[float, float], tol: float = 1e-4,
                            floor: float | None = None, seed: int = 20240229) -> float:
    """Onset of non-real window eigenvalues of the full discretized operator.

    Values of the pair discriminant within ``floor**2`` of zero, with
    ``floor`` tied to the eigensolver residual level, count as undecided
    and are treated as real.
    """
    floor = 1e-9 * window.scale if floor is None else floor

    def fn(e):
        d = pair_discriminant([p.value for p in eigs_window(op_builder(e), window, seed=seed)])
        return d if abs(d) > floor**2 else floor**2

    lo, hi = map(float, bracket)
    return _root(fn, lo, hi, tol, "direct pair discriminant")


def label_pair(values, floor: float) -> tuple[complex, complex]:
    """Order two eigenvalues as ``(lambda_+, lambda_-)``.

    A conjugate pair puts the positive imaginary part first, a real pair the
    larger real part first; the same convention as the closed form.
    """
    v = sorted(values, key=lambda z: (z.real, z.imag))
    if len(v) != 2:
        raise ValueError(f"expected two eigenvalues, got {len(v)}")
    if max(abs(v[0].imag), abs(v[1].imag)) > floor:
        v.sort(key=lambda z: z.imag, reverse=True)
        return complex(v[0]), complex(v[1])
    return complex(v[1]), complex(v[0])


def match_distance(x, y) -> float:
    """Distance between two-element multisets under the best pairing."""
    x, y = list(x), list(y)
    if len(x) != len(y):
        return math.inf
    if len(x) != 2:
        return float(np.max(np.abs(np.sort_complex(np.array(x)) - np.sort_complex(np.array(y)))))
    d1 = max(abs(x[0] - y[0]), abs(x[1] - y[1]))
    d2 = max(abs(x[0] - y[1]), abs(x[1] - y[0]))
    return float(min(d1, d2))


def pairing_residual(values) -> float:
    """How far a set of eigenvalues is from being closed under conjugation."""
    v = np.asarray(values, dtype=complex)
    if v.size == 0:
        return 0.0
    return float(max(np.min(np.abs(np.conj(z) - v)) for z in v))


@dataclass
class SweepRow:
    epsilon: float
    a: complex
    b: complex
    lambda_plus: complex
    lambda_minus: complex
    discriminant: float
    direct_plus: complex
    direct_minus: complex
    verdict: str
    subspace_error: float
    pairing_error: float
    structure_error: float
    origin: str = "computed"


@dataclass
class BifurcationReport:
    rows: list[SweepRow]
    epsilon_plus_predicted: float
    epsilon_plus_located: float | None
    epsilon_plus_direct: float | None
    scale: float
    t: complex
    bisection_tol: float
    collision_tol: float
    conjugation_checks: list[tuple[float, float, float]] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def verdicts(self) -> list[str]:
        return [r.verdict for r in self.rows if r.origin == "computed"]

    @property
    def passed(self) -> bool:
        return not self.failures


TOLERANCES = {
    "subspace_relative": 1e-7,
    "pairing_relative": 1e-10,
    "structure_relative": 1e-8,
    "threshold_agreement": 1e-3,
    "conjugation_spectrum": 1e-10,
    "conjugation_entries": 1e-9,
}


def verdict_for(lam_plus: complex, lam_minus: complex, disc: float, collision_tol: float) -> str:
    if abs(lam_plus - lam_minus) <= collision_tol:
        return COLLISION
    return REAL if disc > 0 else COMPLEX


def sweep(problem, epsilons, *, located: float | None = None, located_direct: float | None = None,
          tol: float = 1e-4, conjugation_samples: int = 3,
          tolerances: dict | None = None) -> BifurcationReport:
    """Reduced model and direct window spectrum for every ``epsilon >= 0``.

    Rows for ``-epsilon`` are filled from ``P_{-eps} = conj(P_eps)`` and the
    identity is verified on ``conjugation_samples`` points.
    """
    tols = dict(TOLERANCES, **(tolerances or {}))
    eps_values = sorted({float(e) for e in epsilons if e >= 0})
    if located is not None:
        eps_values = sorted(set(eps_values) | {float(located)})
    if eps_values and eps_values[-1] > problem.max_epsilon * (1 + 1e-12):
        raise EpsilonTooLarge(
            f"sweep reaches {eps_values[-1]:.4g} > {problem.max_epsilon_ratio:g} x window radius"
        )
    scale = problem.scale
    t = problem.t
    floor = 1e-9 * scale
    collision_tol = 10.0 * math.sqrt(tol) * abs(t)
    positive = [e for e in eps_values if e > 0 and e != located]
    picks = set()
    if conjugation_samples and positive:
        idx = np.linspace(0, len(positive) - 1, min(conjugation_samples, len(positive)))
        picks = {positive[int(round(i))] for i in idx}
    rows, checks = [], []
    for eps in eps_values:
        model = problem.model(eps)
        lp, lm = model.eigenvalues
        disc = discriminant(model).value
        direct = [p.value for p in problem.direct(eps)]
        if len(direct) != 2:
            raise EpsilonTooLarge(f"window holds {len(direct)} eigenvalues at epsilon={eps:.6g}")
        dp, dm = label_pair(direct, floor)
        row = SweepRow(
            epsilon=eps, a=model.a, b=model.b, lambda_plus=lp, lambda_minus=lm,
            discriminant=disc, direct_plus=dp, direct_minus=dm,
            verdict=verdict_for(lp, lm, disc, collision_tol),
            subspace_error=match_distance(model.matrix_eigenvalues, direct) / scale,
            pairing_error=pairing_residual(direct) / scale,
            structure_error=model.symmetry_residual / scale,
        )
        rows.append(row)
        if eps in picks and row.verdict != COLLISION:
            neg_model = problem.model(-eps)
            neg_direct = [p.value for p in problem.direct(-eps)]
            spec_res = match_distance(neg_direct, direct)
            entry_res = max(abs(neg_model.a - np.conj(model.a)), abs(neg_model.b - np.conj(model.b)))
            checks.append((eps, spec_res, float(entry_res)))

    report = BifurcationReport(
        rows=[],
        epsilon_plus_predicted=problem.epsilon_predicted,
        epsilon_plus_located=located,
        epsilon_plus_direct=located_direct,
        scale=scale,
        t=t,
        bisection_tol=tol,
        collision_tol=collision_tol,
        conjugation_checks=checks,
        tolerances=tols,
    )

    mirrored = []
    for r in rows:
        if r.epsilon == 0:
            continue
        a, b = np.conj(r.a), np.conj(r.b)
        lp, lm = r.lambda_plus, r.lambda_minus
        mirrored.append(SweepRow(
            epsilon=-r.epsilon, a=complex(a), b=complex(b), lambda_plus=lp, lambda_minus=lm,
            discriminant=r.discriminant, direct_plus=r.direct_plus, direct_minus=r.direct_minus,
            verdict=r.verdict, subspace_error=r.subspace_error, pairing_error=r.pairing_error,
            structure_error=r.structure_error, origin="conjugated",
        ))
    report.rows = sorted(mirrored + rows, key=lambda r: r.epsilon)
    report.failures = check_report(report, problem)
    return report


def check_report(report: BifurcationReport, problem=None) -> list[str]:
    tols = report.tolerances or TOLERANCES
    failures = []
    computed = [r for r in report.rows if r.origin == "computed"]
    for r in computed:
        if r.subspace_error > tols["subspace_relative"]:
            failures.append(f"subspace exactness {r.subspace_error:.2e} at eps={r.epsilon:.6g}")
        if r.pairing_error > tols["pairing_relative"]:
            failures.append(f"PT pairing {r.pairing_error:.2e} at eps={r.epsilon:.6g}")
        if r.structure_error > tols["structure_relative"]:
            failures.append(f"M structure {r.structure_error:.2e} at eps={r.epsilon:.6g}")
    zero = [r for r in computed if r.epsilon == 0.0]
    if problem is not None and zero:
        M0 = problem.model(0.0).matrix
        herm = max(float(np.max(np.abs(M0 - M0.conj().T))), abs(M0[0, 0] - M0[1, 1]))
        if herm > tols["structure_relative"] * report.scale:
            failures.append(f"M_0 not Hermitian with equal diagonal ({herm:.2e})")
    code = "".join({REAL: "R", COLLISION: "C", COMPLEX: "X"}[v] for v in report.verdicts)
    if not re.fullmatch(r"R*C*X*", code):
        failures.append(f"verdict sequence is not monotone: {code}")
    if report.epsilon_plus_located is not None and report.epsilon_plus_direct is not None:
        rel = abs(report.epsilon_plus_located - report.epsilon_plus_direct) / report.epsilon_plus_located
        if rel > tols["threshold_agreement"]:
            failures.append(f"reduced and direct thresholds differ by {rel:.2e}")
    if report.epsilon_plus_located is not None:
        at = [r for r in computed if r.epsilon == report.epsilon_plus_located]
        if at and abs(at[0].lambda_plus - at[0].lambda_minus) > report.collision_tol:
            failures.append("eigenvalues do not coalesce at the located threshold")
    for eps, spec_res, entry_res in report.conjugation_checks:
        if spec_res > tols["conjugation_spectrum"]:
            failures.append(f"spectra at +-{eps:.6g} differ by {spec_res:.2e}")
        if entry_res > tols["conjugation_entries"] * report.scale:
            failures.append(f"M_(-eps) != conj(M_eps) at {eps:.6g} ({entry_res:.2e})")
    return failures


def epsilon_grid(center: float, upper: float, levels: int = 5, step: float = 0.05) -> list[float]:
    """Zero plus points geometric in their distance from ``center``.

    Offsets are ``center * step * 2**k`` on either side, capped at ``upper``.
    """
    pts = {0.0}
    for k in range(levels):
        off = center * step * 2**k
        if off < center:
            pts.add(center - off)
        if center + off <= upper:
            pts.add(center + off)
    if 2 * center <= upper:
        pts.add(2 * center)
    return sorted(pts)


def threshold_bracket(problem, lo_factor: float = 0.5, hi_factor: float = 1.5) -> tuple[float, float]:
    pred = problem.epsilon_predicted
    return lo_factor * pred, min(hi_factor * pred, problem.max_epsilon)


def analyze(problem, *, tol: float = 1e-4, levels: int = 5, direct: bool = True,
            epsilons=None, upper: float | None = None, conjugation_samples: int = 3,
            tolerances: dict | None = None) -> BifurcationReport:
    """Predict, locate (reduced and direct) and sweep around the threshold.

    Without explicit ``epsilons`` the grid is geometric about the located
    threshold up to ``upper`` (default twice the threshold).
    """
    bracket = threshold_bracket(problem)
    located = locate_threshold(problem.model, bracket, tol)
    located_direct = None
    if direct:
        located_direct = locate_threshold_direct(problem.operator, problem.window, bracket, tol,
                                                 seed=problem.seed)
    if epsilons is None:
        upper = 2 * located if upper is None else upper
        if upper > problem.max_epsilon * (1 + 1e-12):
            raise EpsilonTooLarge(
                f"sweep upper end {upper:.6g} exceeds {problem.max_epsilon_ratio:g} x window "
                f"radius ({problem.max_epsilon:.6g})"
            )
        epsilons = epsilon_grid(located, upper, levels)
    return sweep(problem, epsilons, located=located, located_direct=located_direct, tol=tol,
                 conjugation_samples=conjugation_samples, tolerances=tolerances)
