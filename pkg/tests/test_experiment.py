import json
import os

import numpy as np
import pytest

from mhlab.cli import main
from mhlab.experiment import (DEFAULTS, PRESETS, TRACE_HEADER, ConfigError, build_problem,
                              emit_reports, parse_config, run, summary_line)

TWO_POINT = """\
# minimal two-point experiment
space.kind = counting
space.n_points = 2
target.family = two-point
target.p = 0.75
proposal.family = uniform
run.suites = all
"""


def fast(text, **extra):
    extra.setdefault("run.n_replicas", "2000")
    extra.setdefault("run.random_trials", "20")
    return parse_config(text, extra)


def test_parse_minimal():
    cfg = parse_config(TWO_POINT)
    assert cfg["target.p"] == "0.75"
    assert cfg.suites == ["kernel-checks", "spectral", "convergence", "sampler"]


def test_parse_grid_config():
    cfg = parse_config("space.kind = grid\nspace.lower = -6\nspace.upper = 6\nspace.n_cells = 120\n"
                       "target.family = grid-gaussian\ntarget.mean = 0\ntarget.sd = 1\n"
                       "proposal.family = random-walk\nproposal.width = 1.0\n")
    prob = build_problem(cfg)
    assert prob.space.n_points == 120
    assert np.all(prob.target.values > 0)


def test_zero_target_rejected():
    text = "space.n_points = 3\ntarget.family = table\ntarget.values = 0.5, 0, 0.5\n"
    with pytest.raises(ConfigError, match="target must be strictly positive") as info:
        parse_config(text)
    assert "target.values" in str(info.value)


@pytest.mark.parametrize("text, key", [
    ("space.colour = red\n", "space.colour"),
    ("target.family = cauchy\n", "target.family"),
    ("run.suites = kernel-checks, vibes\n", "run.suites"),
    ("run.n_replicas = 0\n", "run.n_replicas"),
    ("run.n_steps = 2.5\n", "run.n_steps"),
    ("tol.algebra = -1\n", "tol.algebra"),
    ("space.kind = grid\nspace.n_cells = 1\n", "space.kind"),
    ("initial.index = 7\n", "initial.index"),
    ("this is not a pair\n", "line 1"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(text)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip(name):
    cfg = parse_config(PRESETS[name])
    again = parse_config(cfg.serialize())
    assert again.values == cfg.values
    assert set(cfg.values) == set(DEFAULTS)


def test_run_two_point_passes():
    rep = run(fast(TWO_POINT, **{"run.n_steps": "20"}))
    assert rep.passed and rep.exit_code == 0
    tv = rep.convergence.tv
    np.testing.assert_allclose(tv, 0.25 * (1 / 3) ** np.arange(21), atol=1e-9)
    assert rep.gap == pytest.approx(2 / 3)


def test_run_negative_control_passes():
    rep = run(fast(PRESETS["disconnected-negative-control"]))
    assert rep.nu is None
    assert rep.passed
    assert "negative_control_plateau" in rep.suites["convergence"].checks
    assert rep.suites["spectral"].checks["unit_eigenvalue_multiplicity_reducible"]["value"] == 2


def test_run_from_target_is_flat():
    rep = run(fast(TWO_POINT, **{"initial.family": "target", "run.n_steps": "15"}))
    assert rep.passed
    assert np.max(np.abs(rep.convergence.tv)) <= 1e-12
    assert np.max(np.abs(rep.convergence.l2pi_bound)) <= 1e-12


def test_failing_check_gives_exit_code_one():
    # demanding an impossible TV target after one step must fail
    rep = run(fast(TWO_POINT, **{"run.n_steps": "1", "run.suites": "convergence"}))
    assert not rep.passed and rep.exit_code == 1
    assert not rep.suites["convergence"].checks["final_tv"]["pass"]


def test_sampler_skipped_when_kernel_checks_fail(monkeypatch):
    import mhlab.experiment as ex
    monkeypatch.setattr(ex, "row_closure_residual", lambda k: 1.0)
    rep = run(fast(TWO_POINT, **{"run.n_steps": "20"}))
    assert rep.suites["sampler"].skipped and not rep.passed


def test_emit_reports_formats(tmp_path):
    rep = run(fast(TWO_POINT, **{"run.n_steps": "20"}))
    paths = emit_reports(rep, tmp_path / "out")
    lines = paths["trace"].read_text().splitlines()
    assert lines[0] == ",".join(TRACE_HEADER) == "n,tv,l1,l2pi_bound,cauchy_inc"
    assert len(lines) == 1 + 21
    summary = paths["summary"].read_text()
    assert summary.count("\n") == 1 and summary.startswith("PASS")
    assert "max_residual=" in summary and "spectral_gap=0.666667" in summary
    doc = json.loads(paths["report"].read_text())
    assert doc["seed"] == 20240601 and doc["version"]
    assert doc["tolerances"]["tol.algebra"] == 1e-12
    assert "PCG64" in doc["stream"]
    assert paths["sampler"].read_text().startswith("n,empirical_tv\n")


def test_reports_are_deterministic(tmp_path):
    cfg = fast(TWO_POINT, **{"run.n_steps": "12"})
    a = emit_reports(run(cfg), tmp_path / "a")
    b = emit_reports(run(cfg), tmp_path / "b")
    for key in ("trace", "summary", "sampler"):
        assert a[key].read_bytes() == b[key].read_bytes()
    da = json.loads(a["report"].read_text())
    db = json.loads(b["report"].read_text())
    da.pop("timing"), db.pop("timing")
    assert da == db


def test_emit_into_unwritable_location(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rep = run(fast(TWO_POINT, **{"run.n_steps": "5", "run.suites": "kernel-checks"}))
    with pytest.raises(OSError):
        emit_reports(rep, blocker / "sub")


def test_cli_preset(tmp_path, capsys):
    code = main(["run", "--preset", "two-point", "--out", str(tmp_path), "--seed", "7"])
    assert code == 0
    assert capsys.readouterr().out.startswith("PASS")
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["seed"] == 7


def test_cli_config_file_and_suite(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(TWO_POINT)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--suite", "kernel-checks", "--steps", "5"])
    assert code == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert list(doc["suites"]) == ["kernel-checks"]


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus.key = 1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bogus.key" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path)]) == 2


def test_cli_failure_exit_code(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(TWO_POINT + "run.suites = convergence\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--steps", "1"]) == 1
    assert (tmp_path / "o" / "summary.txt").read_text().startswith("FAIL")


def test_worker_cap(monkeypatch):
    from mhlab.experiment import max_workers
    monkeypatch.setenv("MHLAB_MAX_WORKERS", "1")
    assert max_workers() == 1
    monkeypatch.setenv("MHLAB_MAX_WORKERS", "junk")
    assert max_workers() == 1
    rep = run(fast(TWO_POINT, **{"run.n_steps": "20"}))
    assert rep.passed
