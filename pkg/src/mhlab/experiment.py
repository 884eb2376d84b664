"""Declarative experiments: config parsing, suite orchestration, report files.

Config files are flat ``key = value`` lines with dotted section prefixes::

    space.kind = counting
    space.n_points = 2
    target.family = two-point
    target.p = 0.75
    proposal.family = uniform
    run.suites = all

Blank lines and ``#`` comments are ignored; any key outside :data:`DEFAULTS`
is rejected.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import (cauchy_check_even_powers, default_max_steps, duality_residual,
                          evolve, nonexpansive_check, truncation_decomposition_check, truncate,
                          tv_trace)
from .kernel import (MHKernel, block_proposal, build_kernel, check_detailed_balance,
                     closed_form_residual, first_positive_order, independence_proposal,
                     random_walk_proposal, rejection_mass_direct, row_closure_residual,
                     stationarity_check, table_proposal, uniform_proposal)
from .measure_space import (Density, StateSpace, build_grid_space, point_mass,
                            probability_density, target_density)
from .sampler import STREAM_ALGORITHM, empirical_vs_exact, run_ensemble
from .spectral import (check_contraction, check_self_adjoint, fixed_point_constancy,
                       quadratic_form_sequence, spectral_gap, strong_limit_trace,
                       verify_operator_inequality)

SUITES = ("kernel-checks", "spectral", "convergence", "sampler")
WORKERS_ENV = "MHLAB_MAX_WORKERS"

DEFAULTS: dict[str, str] = {
    "space.kind": "counting",
    "space.n_points": "2",
    "space.weights": "",
    "space.lower": "-6",
    "space.upper": "6",
    "space.n_cells": "120",
    "target.family": "uniform",
    "target.p": "0.5",
    "target.mean": "0",
    "target.sd": "1",
    "target.values": "",
    "proposal.family": "uniform",
    "proposal.width": "1",
    "proposal.values": "",
    "proposal.blocks": "",
    "initial.family": "point",
    "initial.index": "0",
    "initial.mean": "0",
    "initial.sd": "1",
    "initial.values": "",
    "run.suites": "all",
    "run.n_steps": "auto",
    "run.n_replicas": "100000",
    "run.sampler_steps": "10",
    "run.base_seed": "20240601",
    "run.nu_max": "10",
    "run.random_trials": "200",
    "tol.algebra": "1e-12",
    "tol.closure": "1e-10",
    "tol.tv_target": "1e-8",
    "tol.plateau": "0.1",
}

FAMILIES = {
    "space.kind": {"counting", "grid"},
    "target.family": {"uniform", "two-point", "grid-gaussian", "table"},
    "proposal.family": {"uniform", "random-walk", "independence", "table", "blocks"},
    "initial.family": {"point", "target", "uniform", "gaussian", "table"},
}

PRESETS: dict[str, str] = {
    "two-point": """\
space.kind = counting
space.n_points = 2
target.family = two-point
target.p = 0.75
proposal.family = uniform
initial.family = point
initial.index = 0
run.n_steps = 20
""",
    "grid-gaussian-rw": """\
space.kind = grid
space.lower = -6
space.upper = 6
space.n_cells = 120
target.family = grid-gaussian
target.mean = 0
target.sd = 1
proposal.family = random-walk
proposal.width = 1.0
initial.family = gaussian
initial.mean = 0
initial.sd = 2
run.n_replicas = 20000
tol.tv_target = 1e-6
""",
    "disconnected-negative-control": """\
space.kind = counting
space.n_points = 4
target.family = table
target.values = 0.3, 0.2, 0.1, 0.4
proposal.family = blocks
proposal.blocks = 0,1; 2,3
initial.family = point
initial.index = 0
run.n_steps = 60
run.n_replicas = 20000
""",
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _rows(text: str, key: str) -> list[list[float]]:
    return [_floats(row, key) for row in text.split(";") if row.strip()]


@dataclass
class ExperimentConfig:
    values: dict[str, str] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def num(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {self.values[key]!r}") from None

    def integer(self, key: str) -> int:
        v = self.num(key)
        if v != int(v):
            raise ConfigError(f"{key}: expected an integer, got {self.values[key]!r}")
        return int(v)

    @property
    def suites(self) -> list[str]:
        raw = [s.strip() for s in self.values["run.suites"].split(",") if s.strip()]
        if raw == ["all"]:
            return list(SUITES)
        return [s for s in SUITES if s in raw]

    def serialize(self) -> str:
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))

    def tolerances(self) -> dict[str, float]:
        return {k: self.num(k) for k in sorted(self.values) if k.startswith("tol.")}


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse and validate config text; unknown keys are an error."""
    values = dict(DEFAULTS)
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        items.append((key, value))
    items.extend((overrides or {}).items())
    for key, value in items:
        if key not in DEFAULTS:
            raise ConfigError(f"{key}: unknown config key")
        values[key] = value
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    for key, allowed in FAMILIES.items():
        if cfg[key] not in allowed:
            raise ConfigError(f"{key}: unknown family {cfg[key]!r}; expected one of {sorted(allowed)}")
    raw = [s.strip() for s in cfg["run.suites"].split(",") if s.strip()]
    for s in raw:
        if s != "all" and s not in SUITES:
            raise ConfigError(f"run.suites: unknown suite {s!r}")
    if cfg["run.n_steps"] != "auto" and cfg.integer("run.n_steps") < 1:
        raise ConfigError("run.n_steps: must be positive or 'auto'")
    for key in ("run.n_replicas", "run.sampler_steps", "run.nu_max", "run.random_trials"):
        if cfg.integer(key) < 1:
            raise ConfigError(f"{key}: must be positive")
    cfg.integer("run.base_seed")
    for key in cfg.tolerances():
        if not cfg.num(key) > 0:
            raise ConfigError(f"{key}: tolerance must be positive")
    try:
        build_problem(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        key = _blame(cfg, str(exc))
        raise ConfigError(f"{key}: {exc}") from None


def _blame(cfg: ExperimentConfig, msg: str) -> str:
    if "target" in msg:
        return "target.family"
    if "proposal" in msg or "row" in msg or "block" in msg:
        return "proposal.family"
    if "grid" in msg or "weights" in msg or "n_cells" in msg or "state space" in msg:
        return "space.kind"
    return "initial.family"


@dataclass
class Problem:
    space: StateSpace
    target: Density
    kernel: MHKernel
    initial: Density


def _build_space(cfg: ExperimentConfig) -> StateSpace:
    if cfg["space.kind"] == "grid":
        return build_grid_space(cfg.num("space.lower"), cfg.num("space.upper"),
                                cfg.integer("space.n_cells"))
    n = cfg.integer("space.n_points")
    if cfg["space.weights"]:
        w = _floats(cfg["space.weights"], "space.weights")
        if len(w) != n:
            raise ConfigError("space.weights: length does not match space.n_points")
        return StateSpace(np.array(w))
    return StateSpace(np.ones(n))


def _gaussian(space: StateSpace, mean: float, sd: float) -> np.ndarray:
    if not sd > 0:
        raise ValueError("gaussian sd must be positive")
    x = space.positions()
    return np.exp(-0.5 * ((x - mean) / sd) ** 2)


def _build_target(cfg: ExperimentConfig, space: StateSpace) -> Density:
    fam = cfg["target.family"]
    if fam == "uniform":
        vals = np.ones(space.n_points)
    elif fam == "two-point":
        if space.n_points != 2:
            raise ConfigError("target.family: two-point needs a 2-point space")
        p = cfg.num("target.p")
        vals = np.array([p, 1.0 - p]) / space.weights
    elif fam == "grid-gaussian":
        vals = _gaussian(space, cfg.num("target.mean"), cfg.num("target.sd"))
    else:
        vals = np.array(_floats(cfg["target.values"], "target.values"))
        if vals.shape != (space.n_points,):
            raise ConfigError("target.values: length does not match the space")
    if np.any(vals <= 0):
        raise ConfigError(f"{'target.values' if fam == 'table' else 'target.family'}: "
                          "target must be strictly positive")
    return target_density(space, vals)


def _build_proposal(cfg: ExperimentConfig, space: StateSpace, target: Density):
    fam = cfg["proposal.family"]
    if fam == "uniform":
        return uniform_proposal(space)
    if fam == "random-walk":
        return random_walk_proposal(space, cfg.num("proposal.width"))
    if fam == "independence":
        return independence_proposal(target)
    if fam == "blocks":
        blocks = [[int(v) for v in _floats(b, "proposal.blocks")]
                  for b in cfg["proposal.blocks"].split(";") if b.strip()]
        return block_proposal(space, blocks)
    return table_proposal(space, _rows(cfg["proposal.values"], "proposal.values"),
                          normalize_rows=True)


def _build_initial(cfg: ExperimentConfig, space: StateSpace, target: Density) -> Density:
    fam = cfg["initial.family"]
    if fam == "point":
        i = cfg.integer("initial.index")
        if not 0 <= i < space.n_points:
            raise ConfigError("initial.index: out of range")
        return point_mass(space, i)
    if fam == "target":
        return probability_density(space, target.values)
    if fam == "uniform":
        vals = np.ones(space.n_points)
    elif fam == "gaussian":
        vals = _gaussian(space, cfg.num("initial.mean"), cfg.num("initial.sd"))
    else:
        vals = np.array(_floats(cfg["initial.values"], "initial.values"))
        if vals.shape != (space.n_points,) or np.any(vals < 0):
            raise ConfigError("initial.values: need one nonnegative value per point")
    return probability_density(space, vals / (vals @ space.weights))


def build_problem(cfg: ExperimentConfig) -> Problem:
    space = _build_space(cfg)
    target = _build_target(cfg, space)
    kernel = build_kernel(target, _build_proposal(cfg, space, target))
    return Problem(space, target, kernel, _build_initial(cfg, space, target))


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checks: dict[str, dict] = field(default_factory=dict)
    skipped: bool = False

    def check(self, name: str, value: float, limit: float, ok: bool | None = None) -> None:
        ok = value <= limit if ok is None else ok
        self.checks[name] = {"value": float(value), "limit": float(limit), "pass": bool(ok)}
        self.passed = self.passed and bool(ok)


@dataclass
class RunReport:
    config: ExperimentConfig
    suites: dict[str, SuiteResult]
    convergence: object = None
    sampler_tv: list[float] | None = None
    spectrum: list[float] | None = None
    gap: float | None = None
    nu: int | None = None
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def max_residual(self) -> float:
        vals = [c["value"] for s in self.suites.values() for name, c in s.checks.items()
                if name.endswith("residual")]
        return max(vals) if vals else 0.0

    def to_dict(self, with_timing: bool = True) -> dict:
        d = {
            "tool": "mhlab",
            "version": __version__,
            "passed": self.passed,
            "config": dict(sorted(self.config.values.items())),
            "seed": self.config.integer("run.base_seed"),
            "stream": STREAM_ALGORITHM,
            "tolerances": self.config.tolerances(),
            "positivity_order": self.nu,
            "spectral_gap": self.gap,
            "spectrum": self.spectrum,
            "suites": {name: {"passed": s.passed, "skipped": s.skipped, "checks": s.checks}
                       for name, s in self.suites.items()},
        }
        if self.convergence is not None:
            d["convergence"] = [vars(r) for r in self.convergence.records]
        if self.sampler_tv is not None:
            d["sampler_tv"] = self.sampler_tv
        if with_timing:
            d["timing"] = self.timing
        return d


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "2")))
    except ValueError:
        return 1


def _kernel_suite(cfg: ExperimentConfig, k: MHKernel) -> SuiteResult:
    alg, closure = cfg.num("tol.algebra"), cfg.num("tol.closure")
    res = SuiteResult("kernel-checks", True)
    res.check("row_closure_residual", row_closure_residual(k), alg)
    res.check("detailed_balance_residual", check_detailed_balance(k), alg)
    res.check("closed_form_residual", closed_form_residual(k), alg)
    res.check("stationarity_residual", stationarity_check(k), closure)
    res.check("rejection_mass_residual",
              float(np.max(np.abs(rejection_mass_direct(k) - k.phi))), closure)
    return res


def _spectral_suite(cfg: ExperimentConfig, prob: Problem, nu) -> SuiteResult:
    k = prob.kernel
    alg = cfg.num("tol.algebra")
    res = SuiteResult("spectral", True)
    rng = np.random.default_rng(cfg.integer("run.base_seed"))
    n = prob.space.n_points
    worst_contr = worst_adj = worst_q = worst_ineq = -math.inf
    for _ in range(cfg.integer("run.random_trials")):
        f, g = rng.normal(size=n), rng.normal(size=n)
        kf, nf = check_contraction(k, f)
        worst_contr = max(worst_contr, kf - nf)
        worst_adj = max(worst_adj, check_self_adjoint(k, f, g))
        s = quadratic_form_sequence(k, f, 1, 10)
        worst_q = max(worst_q, float(np.max(np.diff(s))), float(-s.min()))
        lhs, rhs = verify_operator_inequality(k, f, 1, 1, exact=True)
        worst_ineq = max(worst_ineq, lhs - rhs)
    res.check("contraction_excess", worst_contr, alg)
    res.check("self_adjoint_residual", worst_adj, alg)
    res.check("quadratic_form_increase", worst_q, alg)
    res.check("operator_inequality_excess", worst_ineq, alg)
    report = fixed_point_constancy(k, nu or 1, diagnostic=True)
    if nu is not None:
        res.check("unit_eigenvalue_multiplicity", report.unit_multiplicity, 1)
        res.check("fixed_vector_spread", report.constancy_spread, 1e-8)
        e = strong_limit_trace(k, rng.normal(size=n), 50)
        res.check("strong_limit_increase", float(np.max(np.diff(e))), alg)
    else:
        # without positivity, constants need not be the only fixed functions
        res.check("unit_eigenvalue_multiplicity_reducible", report.unit_multiplicity, 2,
                  ok=report.unit_multiplicity >= 2)
    return res


def _convergence_suite(cfg: ExperimentConfig, prob: Problem, nu, n_steps: int):
    k = prob.kernel
    alg, closure = cfg.num("tol.algebra"), cfg.num("tol.closure")
    res = SuiteResult("convergence", True)
    rep = tv_trace(prob.initial, k, n_steps, cfg.integer("run.nu_max"))
    tv = rep.tv
    res.check("tv_monotone_increase", float(np.max(np.diff(tv), initial=0.0)), alg)
    res.check("sandwich_excess", float(np.max(rep.l1 - rep.l2pi_bound)), closure)
    res.check("l1_tv_residual", float(np.max(np.abs(rep.l1 - 2 * tv))), alg)
    res.check("duality_residual",
              max(duality_residual(k, prob.initial, j) for j in (1, 5, 20)), closure)
    lhs, rhs = nonexpansive_check(prob.initial, prob.target, k, 5)
    res.check("nonexpansive_excess", lhs - rhs, alg)
    prev = math.inf
    worst_mass = worst_mono = -math.inf
    for m in (1, 2, 4, 8, 16, 32, 64, 128):
        tr = truncate(prob.initial, prob.target, m)
        worst_mass = max(worst_mass, tr.mass_gap - tr.l1_residual)
        worst_mono = max(worst_mono, tr.l1_residual - prev)
        prev = tr.l1_residual
    res.check("truncation_mass_excess", worst_mass, alg)
    res.check("truncation_monotone_increase", worst_mono, alg)
    if nu is not None:
        res.check("final_tv", float(tv[-1]), cfg.num("tol.tv_target"))
        dec = truncation_decomposition_check(prob.initial, k, 8, n_steps)
        res.check("decomposition_excess", dec.total - dec.bound, closure)
        cauchy = cauchy_check_even_powers(prob.initial, k, max(2, n_steps // 2))
        res.check("cauchy_l1_increase", float(np.max(np.diff(cauchy.l1_increments))), alg)
        res.check("cauchy_l2pi_increase", float(np.max(np.diff(cauchy.l2pi_increments))), closure)
    else:
        res.check("negative_control_plateau", float(tv[-1]), cfg.num("tol.plateau"),
                  ok=tv[-1] > cfg.num("tol.plateau"))
    return res, rep


def _sampler_suite(cfg: ExperimentConfig, prob: Problem) -> tuple[SuiteResult, list[float]]:
    res = SuiteResult("sampler", True)
    n_steps = cfg.integer("run.sampler_steps")
    ens = run_ensemble(prob.initial, prob.kernel, n_steps, cfg.integer("run.n_replicas"),
                       cfg.integer("run.base_seed"))
    disc = empirical_vs_exact(ens, evolve(prob.initial, prob.kernel, n_steps))
    res.check("max_empirical_tv", float(disc.tv.max()), disc.envelope)
    return res, [float(v) for v in disc.tv]


def run(cfg: ExperimentConfig) -> RunReport:
    """Run the requested suites in dependency order.

    The sampler suite is skipped whenever the kernel checks fail.
    """
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    k = prob.kernel
    suites = cfg.suites
    report = RunReport(cfg, {})
    report.nu = first_positive_order(k, cfg.integer("run.nu_max"))
    spec = fixed_point_constancy(k, 1, diagnostic=True)
    report.spectrum = [float(v) for v in spec.eigenvalues]
    report.gap = spectral_gap(k)
    kernel_ok = True
    if "kernel-checks" in suites:
        report.suites["kernel-checks"] = _kernel_suite(cfg, k)
        kernel_ok = report.suites["kernel-checks"].passed
    if cfg["run.n_steps"] == "auto":
        n_steps = default_max_steps(k) if report.gap > 1e-8 else 100
    else:
        n_steps = cfg.integer("run.n_steps")
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        fut_spec = pool.submit(_spectral_suite, cfg, prob, report.nu) \
            if "spectral" in suites else None
        fut_conv = pool.submit(_convergence_suite, cfg, prob, report.nu, n_steps) \
            if "convergence" in suites else None
        if fut_spec is not None:
            report.suites["spectral"] = fut_spec.result()
        if fut_conv is not None:
            report.suites["convergence"], report.convergence = fut_conv.result()
    if "sampler" in suites:
        if kernel_ok:
            report.suites["sampler"], report.sampler_tv = _sampler_suite(cfg, prob)
        else:
            report.suites["sampler"] = SuiteResult("sampler", False, skipped=True)
    report.timing["seconds"] = time.perf_counter() - t0
    return report


TRACE_HEADER = ("n", "tv", "l1", "l2pi_bound", "cauchy_inc")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    if report.convergence is not None:
        for r in report.convergence.records:
            writer.writerow([r.n] + [repr(float(v)) for v in (r.tv, r.l1, r.l2pi_bound,
                                                              r.cauchy_inc)])
    return buf.getvalue()


def summary_line(report: RunReport) -> str:
    gap = "nan" if report.gap is None else f"{report.gap:.6g}"
    return (f"{'PASS' if report.passed else 'FAIL'} max_residual={report.max_residual():.3e} "
            f"spectral_gap={gap} positivity_order={report.nu}\n")


def emit_reports(report: RunReport, out_dir) -> dict[str, Path]:
    """Write ``report.json``, ``trace.csv``, ``sampler.csv`` and ``summary.txt``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "report": out / "report.json",
        "trace": out / "trace.csv",
        "summary": out / "summary.txt",
    }
    _atomic_write(paths["report"], json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _atomic_write(paths["trace"], trace_csv(report))
    _atomic_write(paths["summary"], summary_line(report))
    if report.sampler_tv is not None:
        paths["sampler"] = out / "sampler.csv"
        rows = "".join(f"{n},{v!r}\n" for n, v in enumerate(report.sampler_tv))
        _atomic_write(paths["sampler"], "n,empirical_tv\n" + rows)
    return paths
