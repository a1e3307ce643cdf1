import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ptwell.cli import EXIT_CONFIG, SWEEP_HEADER, main, slope_fit
from ptwell.config import load

SMALL = """
name = "small"
[potential]
family = "quartic_1d"
[grid]
extents = [[-3.0, 3.0]]
nodes = [601]
[semiclassical]
h = 0.3
ladder = [0.4, 0.3, 0.25]
delta = 0.3
[epsilon]
max_ratio = 1.0
levels = 2
{extra}
"""


def write_config(tmp_path, extra=""):
    path = tmp_path / "small.toml"
    path.write_text(SMALL.format(extra=extra))
    return str(path)


def invoke(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env, catch_exceptions=False)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bifurcate_bundled_scenario(tmp_path):
    res = invoke("bifurcate", "--config", "quartic_1d", "--out", str(tmp_path))
    assert res.exit_code == 0, res.output
    rows = read_rows(tmp_path / "bifurcate.csv")
    assert rows[0] == ["config_hash", *SWEEP_HEADER]
    assert {r[0] for r in rows[1:]} == {load("quartic_1d").hash}
    verdicts = [r[-2] for r in rows[1:]]
    assert {"real-distinct", "complex-pair"} <= set(verdicts)
    summary = json.loads((tmp_path / "bifurcate_summary.json").read_text())
    assert summary["passed"] is True
    assert summary["seed"] == 20240229
    for key in ("S0", "mu_tilde", "mu", "t_re", "I_W", "epsilon_plus_predicted",
                "epsilon_plus_located", "epsilon_plus_direct", "tolerances"):
        assert key in summary


def test_bifurcate_csv_bit_identical(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert invoke("bifurcate", "--config", cfg, "--out", str(a)).exit_code == 0
    assert invoke("bifurcate", "--config", cfg, "--out", str(b)).exit_code == 0
    assert (a / "bifurcate.csv").read_bytes() == (b / "bifurcate.csv").read_bytes()
    assert b"\r\n" not in (a / "bifurcate.csv").read_bytes()


def test_epsilon_max_above_radius_fraction(tmp_path):
    cfg = write_config(tmp_path, "max = 0.5\n[window]\nradius = 0.2")
    res = CliRunner().invoke(main, ["bifurcate", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG
    assert res.stderr.startswith("error: ConfigInvalid module=cli ")
    assert "error-field: epsilon.max:" in res.stderr


def test_auto_epsilon_max_checked_against_radius(tmp_path):
    cfg = write_config(tmp_path)
    Path(cfg).write_text(Path(cfg).read_text().replace("max_ratio = 1.0", "max_ratio = 0.1"))
    res = CliRunner().invoke(main, ["bifurcate", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG
    assert "error-field: epsilon.max:" in res.stderr


def test_unknown_and_invalid_fields_listed(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('bogus = 1\n[potential]\nfamily = "nope"\n[semiclassical]\nh = -1\ndelta = 0.3\n')
    res = CliRunner().invoke(main, ["agmon", "--config", str(path), "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG
    fields = [line for line in res.stderr.splitlines() if line.startswith("error-field:")]
    joined = "\n".join(fields)
    for key in ("bogus:", "potential.family:", "semiclassical.h:", "grid.nodes:"):
        assert key in joined


def test_missing_config(tmp_path):
    res = CliRunner().invoke(main, ["agmon", "--config", str(tmp_path / "none.toml")])
    assert res.exit_code == EXIT_CONFIG
    assert res.stderr.startswith("error: ConfigInvalid")


def test_output_directory_from_environment(tmp_path):
    cfg = write_config(tmp_path)
    target = tmp_path / "env-out"
    res = invoke("agmon", "--config", cfg, env={"PTWELL_OUT": str(target)})
    assert res.exit_code == 0, res.output
    rows = read_rows(target / "agmon_field.csv")
    assert rows[0] == ["config_hash", "x", "v0", "d_plus", "d_minus"]
    assert len(rows) == 602
    summary = json.loads((target / "agmon_summary.json").read_text())
    assert summary["S0"] == pytest.approx(4 / 3, rel=0.01)


def test_sweep_h_slope(tmp_path):
    cfg = write_config(tmp_path)
    res = invoke("sweep-h", "--config", cfg, "--out", str(tmp_path))
    assert res.exit_code == 0, res.output
    rows = read_rows(tmp_path / "sweep_h.csv")
    assert rows[0][1:] == ["h", "S0", "abs_t", "I_W", "epsilon_plus_predicted",
                           "epsilon_plus_located", "relative_error"]
    h = [float(r[1]) for r in rows[1:]]
    t = [float(r[3]) for r in rows[1:]]
    slope, _ = slope_fit(h, t)
    s0 = float(rows[-1][2])
    assert -1.15 * s0 <= slope <= -0.85 * s0
    summary = json.loads((tmp_path / "sweep_h_summary.json").read_text())
    assert summary["slope"] == pytest.approx(slope, rel=1e-12)


def test_spectrum_and_reduce(tmp_path):
    cfg = write_config(tmp_path)
    res = invoke("spectrum", "--config", cfg, "--out", str(tmp_path), "--export-matrix")
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "spectrum_summary.json").read_text())
    assert summary["count"] == 2 and summary["projector_rank"] == 2
    assert summary["idempotency_residual"] <= 1e-8
    assert (tmp_path / "operator.coo").exists()
    res = invoke("reduce", "--config", cfg, "--out", str(tmp_path), "--epsilon", "0", "--epsilon", "0.01")
    assert res.exit_code == 0, res.output
    rows = read_rows(tmp_path / "reduce.csv")
    assert [float(r[1]) for r in rows[1:]] == [0.0, 0.01]


def test_config_hash_ignores_output(tmp_path):
    a = load(write_config(tmp_path))
    path = tmp_path / "with_output.toml"
    path.write_text('output = "elsewhere"\n' + SMALL.format(extra=""))
    b = load(str(path))
    assert b.output == "elsewhere"
    assert a.hash == b.hash
    c = load(write_config(tmp_path, "conjugation_samples = 2"))
    assert c.hash != a.hash
