"""Command line front end: ``ptwell agmon|spectrum|reduce|bifurcate|sweep-h``."""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from ptwell import __version__
from ptwell.agmon import agmon_distance_field, agmon_graph, well_diameter, well_separation
from ptwell.bifurcation import analyze, locate_threshold, threshold_bracket
from ptwell.config import ScenarioConfig, load
from ptwell.errors import ConfigInvalid, EpsilonTooLarge, PtwellError
from ptwell.operator import export_coo
from ptwell.potentials import locate_wells
from ptwell.problem import DoubleWellProblem
from ptwell.spectra import eigs_window, projector_rank

OUT_ENV = "PTWELL_OUT"

EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_PIPELINE = 3

log = logging.getLogger("ptwell")


def build_problem(cfg: ScenarioConfig, h: float, workers: int = 1) -> DoubleWellProblem:
    return DoubleWellProblem.build(
        cfg.potential(), cfg.grid(), h, cfg.delta,
        window_center=cfg.window_center, window_radius=cfg.window_radius,
        contour_nodes=cfg.contour_nodes, max_epsilon_ratio=cfg.max_epsilon_ratio,
        workers=workers, seed=cfg.seed,
    )


def write_csv(path: Path, header: list[str], rows, config_hash: str) -> Path:
    """CSV with a header row, '\\n' line endings and the config hash on every row."""
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_hash", *header])
        for row in rows:
            writer.writerow([config_hash, *(_cell(v) for v in row)])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_summary(path: Path, cfg: ScenarioConfig, command: str, body: dict) -> Path:
    header = {
        "command": command,
        "scenario": cfg.name,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "version": __version__,
    }
    path.write_text(json.dumps(_jsonable({**header, **body}), indent=2, sort_keys=False) + "\n")
    return path


def error_line(exc: PtwellError) -> str:
    message = str(exc).replace('"', "'")
    return f'error: {exc.kind} module={exc.module} message="{message}"'


class Context:
    def __init__(self, config: str, out: str | None, threads: int):
        self.cfg = load(config)
        base = out or self.cfg.output or os.environ.get(OUT_ENV) or "ptwell-out"
        self.out = Path(base)
        self.out.mkdir(parents=True, exist_ok=True)
        self.threads = threads

    def problem(self, h: float | None = None) -> DoubleWellProblem:
        h = self.cfg.h if h is None else h
        return build_problem(self.cfg, h, self.threads)


def _run(fn):
    """Map library errors to a machine-parsable line and an exit code."""
    try:
        code = fn()
    except ConfigInvalid as exc:
        click.echo(error_line(exc), err=True)
        for field_error in exc.errors:
            click.echo(f"error-field: {field_error}", err=True)
        sys.exit(EXIT_CONFIG)
    except PtwellError as exc:
        click.echo(error_line(exc), err=True)
        sys.exit(EXIT_PIPELINE)
    sys.exit(code or 0)


def common(f):
    f = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Worker threads for resolvent factorizations.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None,
                     help=f"Output directory (default: ${OUT_ENV} or ./ptwell-out).")(f)
    f = click.option("--config", "config", required=True,
                     help="Scenario TOML file or the name of a bundled scenario.")(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="ptwell")
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def main(verbose):
    """Tunneling doublets of PT-symmetric double wells."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@common
def agmon(config, out, threads):
    """Agmon distance fields, separation and well diameters."""

    def go():
        ctx = Context(config, out, threads)
        cfg = ctx.cfg
        spec, grid = cfg.potential(), cfg.grid()
        v0 = spec.v0_on(grid)
        wells = locate_wells(spec, grid, v0)
        graph = agmon_graph(grid, v0)
        fields = {j: agmon_distance_field(grid, v0, wells.by_label(j), graph) for j in (1, -1)}
        separation = well_separation(fields[1], wells)
        diameters = {j: well_diameter(grid, v0, wells.by_label(j), graph) for j in (1, -1)}
        coords = ["x", "y"][: grid.dimension]
        rows = (
            (*pt, v, d1, d2)
            for pt, v, d1, d2 in zip(grid.points, v0, fields[1].values, fields[-1].values)
        )
        write_csv(ctx.out / "agmon_field.csv", [*coords, "v0", "d_plus", "d_minus"], rows, cfg.hash)
        write_summary(ctx.out / "agmon_summary.json", cfg, "agmon", {
            "S0": separation,
            "S0_from_minus": well_separation(fields[-1], wells),
            "diameter_plus": diameters[1],
            "diameter_minus": diameters[-1],
            "well_nodes_plus": len(wells.plus),
            "well_nodes_minus": len(wells.minus),
            "nodes": list(grid.nodes_per_axis),
        })
        click.echo(f"S0 = {separation!r}")

    _run(go)


@main.command()
@common
@click.option("--h", "h", type=float, default=None, help="Override the configured h.")
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--export-matrix", is_flag=True, help="Also write P_eps as a COO text file.")
def spectrum(config, out, threads, h, epsilon, export_matrix):
    """Window eigenvalues of P_eps and projector diagnostics."""

    def go():
        ctx = Context(config, out, threads)
        cfg = ctx.cfg
        p = ctx.problem(h)
        cfg.check_epsilon(abs(epsilon), p.window.radius)
        op = p.operator(epsilon)
        pairs = eigs_window(op, p.window, seed=cfg.seed)
        rows = [(epsilon, i, pr.value.real, pr.value.imag, pr.residual) for i, pr in enumerate(pairs)]
        write_csv(ctx.out / "spectrum.csv", ["epsilon", "index", "re", "im", "residual"], rows, cfg.hash)
        proj = p.projector(epsilon)
        body = {
            "h": p.h,
            "epsilon": epsilon,
            "window": {"center": p.window.center, "radius": p.window.radius,
                       "contour_nodes": p.window.contour_nodes},
            "essential_threshold": p.threshold,
            "count": len(pairs),
            "projector_rank": projector_rank(op, p.window, seed=cfg.seed),
            "idempotency_residual": proj.idempotency_residual(seed=cfg.seed),
            "reference_eigenvalues": p.reference.eigenvalues[:6],
        }
        if export_matrix:
            body["matrix_file"] = export_coo(op, ctx.out / "operator.coo").name
        write_summary(ctx.out / "spectrum_summary.json", cfg, "spectrum", body)
        for pr in pairs:
            click.echo(f"{pr.value.real!r} {pr.value.imag!r}")

    _run(go)


@main.command()
@common
@click.option("--h", "h", type=float, default=None, help="Override the configured h.")
@click.option("--epsilon", type=float, multiple=True,
              help="Perturbation strength(s); default: the configured epsilon values or 0.")
def reduce(config, out, threads, h, epsilon):
    """2x2 interaction matrices M_eps on the doublet."""

    def go():
        ctx = Context(config, out, threads)
        cfg = ctx.cfg
        p = ctx.problem(h)
        values = sorted(set(epsilon or cfg.epsilon_values or (0.0,)))
        for e in values:
            cfg.check_epsilon(abs(e), p.window.radius)
        rows = []
        for e in values:
            m = p.model(e)
            lp, lm = m.eigenvalues
            rows.append((e, m.a.real, m.a.imag, m.b.real, m.b.imag,
                         m.matrix[1, 0].real, m.matrix[1, 0].imag,
                         m.matrix[1, 1].real, m.matrix[1, 1].imag,
                         lp.real, lp.imag, lm.real, lm.imag,
                         m.symmetry_residual, m.biorthogonality_residual, m.dual_condition))
        header = ["epsilon", "re_a", "im_a", "re_b", "im_b", "re_m10", "im_m10", "re_m11", "im_m11",
                  "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus",
                  "symmetry_residual", "biorthogonality_residual", "dual_condition"]
        write_csv(ctx.out / "reduce.csv", header, rows, cfg.hash)
        write_summary(ctx.out / "reduce_summary.json", cfg, "reduce", {
            **p.summary(),
            "M0": p.basis.matrix,
            "P0_window_eigenvalues": p.basis.window_eigenvalues,
        })
        click.echo(f"mu = {p.mu!r}  t = {p.t.real!r}")

    _run(go)


SWEEP_HEADER = ["epsilon", "re_a", "im_a", "re_b", "im_b", "discriminant",
                "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus",
                "direct_re_lambda_plus", "direct_im_lambda_plus",
                "direct_re_lambda_minus", "direct_im_lambda_minus", "verdict", "origin"]


def sweep_rows(report):
    for r in report.rows:
        yield (r.epsilon, r.a.real, r.a.imag, r.b.real, r.b.imag, r.discriminant,
               r.lambda_plus.real, r.lambda_plus.imag, r.lambda_minus.real, r.lambda_minus.imag,
               r.direct_plus.real, r.direct_plus.imag, r.direct_minus.real, r.direct_minus.imag,
               r.verdict, r.origin)


def run_bifurcation(cfg: ScenarioConfig, problem: DoubleWellProblem):
    tol = cfg.tolerances["bisection"]
    epsilons = list(cfg.epsilon_values) or None
    upper = None
    if epsilons is not None:
        cfg.check_epsilon(max(epsilons), problem.window.radius)
    elif cfg.epsilon_max != "auto":
        upper = cfg.epsilon_max
        cfg.check_epsilon(upper, problem.window.radius)
    report_tols = {k: v for k, v in cfg.tolerances.items() if k not in ("bisection", "idempotency")}
    try:
        return analyze(problem, tol=tol, levels=cfg.epsilon_levels, direct=cfg.direct_threshold,
                       epsilons=epsilons, upper=upper, conjugation_samples=cfg.conjugation_samples,
                       tolerances=report_tols)
    except EpsilonTooLarge as exc:
        # "auto" resolves to twice the located threshold, known only now
        raise ConfigInvalid([f"epsilon.max: {exc}"]) from exc


@main.command()
@common
@click.option("--h", "h", type=float, default=None, help="Override the configured h.")
def bifurcate(config, out, threads, h):
    """Locate the PT-symmetry breaking threshold and sweep across it."""

    def go():
        ctx = Context(config, out, threads)
        cfg = ctx.cfg
        p = ctx.problem(h)
        report = run_bifurcation(cfg, p)
        write_csv(ctx.out / "bifurcate.csv", SWEEP_HEADER, sweep_rows(report), cfg.hash)
        write_summary(ctx.out / "bifurcate_summary.json", cfg, "bifurcate", {
            **p.summary(),
            "epsilon_plus_located": report.epsilon_plus_located,
            "epsilon_plus_direct": report.epsilon_plus_direct,
            "collision_tolerance": report.collision_tol,
            "tolerances": {**cfg.tolerances, **report.tolerances},
            "conjugation_checks": [
                {"epsilon": e, "spectrum_residual": s, "entry_residual": m}
                for e, s, m in report.conjugation_checks
            ],
            "max_subspace_error": max(r.subspace_error for r in report.rows),
            "max_pairing_error": max(r.pairing_error for r in report.rows),
            "max_structure_error": max(r.structure_error for r in report.rows),
            "failures": report.failures,
            "passed": report.passed,
        })
        click.echo(f"epsilon_plus predicted={p.epsilon_predicted!r} "
                   f"located={report.epsilon_plus_located!r} direct={report.epsilon_plus_direct!r}")
        for failure in report.failures:
            click.echo(f"invariant-failed: {failure}", err=True)
        return EXIT_INVARIANT if report.failures else 0

    _run(go)


def slope_fit(h_values, t_values) -> tuple[float, float]:
    """Least-squares line of ``log|t|`` against ``1/h``: (slope, intercept)."""
    slope, intercept = np.polyfit(1.0 / np.asarray(h_values), np.log(np.abs(t_values)), 1)
    return float(slope), float(intercept)


@main.command("sweep-h")
@common
def sweep_h(config, out, threads):
    """Tunneling coefficient and threshold along the h ladder."""

    def go():
        ctx = Context(config, out, threads)
        cfg = ctx.cfg
        rows, table = [], []
        for h in cfg.ladder:
            p = ctx.problem(h)
            located = locate_threshold(p.model, threshold_bracket(p), cfg.tolerances["bisection"])
            pred = p.epsilon_predicted
            rel = abs(pred - located) / located
            rows.append((h, p.separation, abs(p.t), p.weight, pred, located, rel))
            table.append({"h": h, "S0": p.separation, "abs_t": abs(p.t), "I_W": p.weight,
                          "epsilon_plus_predicted": pred, "epsilon_plus_located": located})
            p.clear_cache()
        write_csv(ctx.out / "sweep_h.csv",
                  ["h", "S0", "abs_t", "I_W", "epsilon_plus_predicted", "epsilon_plus_located",
                   "relative_error"], rows, cfg.hash)
        body = {"ladder": table}
        if len(rows) >= 2:
            slope, intercept = slope_fit([r[0] for r in rows], [r[2] for r in rows])
            s0 = rows[-1][1]
            body.update(slope=slope, intercept=intercept, S0=s0, slope_over_minus_S0=-slope / s0)
            click.echo(f"slope = {slope!r}  -S0 = {-s0!r}")
        write_summary(ctx.out / "sweep_h_summary.json", cfg, "sweep-h", body)

    _run(go)


if __name__ == "__main__":
    main()
