"""Solve, verify and sweep pipelines with deterministic file output.

Files written by ``run_solve`` (column orders are fixed):

- ``solution.csv``: node, x, delta, u
- ``sequence.csv``: n, next_n, gap, residual, newton_iters
- ``norms.csv``: kind, parameter, value
- ``report.json``: config echo, solver metadata, certificates, norm table
- ``timings.json``: wall-clock seconds per stage (the only file that varies between reruns)
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .certificate import Certificate
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, load_config
from .norms import norm_report
from .operator import assemble_operator
from .solver import (LimitResult, NonCauchyError, Solution, SolverError, approximation_limit,
                     comparison_certificate)

EXIT_OK, EXIT_CERT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
SOLUTION_COLUMNS = ("node", "x", "delta", "u")
SEQUENCE_COLUMNS = ("n", "next_n", "gap", "residual", "newton_iters")
SWEEP_COLUMNS = ("config_hash", "mode", "n_cells", "s", "q", "n_max", "exit_code", "all_pass", "metric",
                 "failed")
RATE_COLUMNS = ("mode", "s", "q", "n_max", "points", "rate")
SWEEP_AXES = (("grid", "n_cells"), ("s",), ("q",), ("n_schedule",))
HARDY_SOBOLEV_TESTS = 20


class InputError(ValueError):
    """Bad input files; maps to exit code 2."""


@dataclass
class RunReport:
    config: dict
    status: str = "ok"
    outside_paper_regime: bool = False
    solver: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    kind: str = "solve"

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.certificates)

    @property
    def exit_code(self) -> int:
        if self.status == "solver_failure":
            return EXIT_SOLVER
        return EXIT_OK if self.all_pass else EXIT_CERT

    def verdicts(self) -> dict:
        return {c.name: bool(c.passed) for c in self.certificates}

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "status": self.status,
            "exit_code": self.exit_code,
            "outside_paper_regime": self.outside_paper_regime,
            "solver": self.solver,
            "certificates": [c.to_dict() for c in self.certificates],
            "norms": [{"kind": k, "parameter": p, "value": v} for k, p, v in self.norms],
            "trace": self.trace,
        }


def _json_safe(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- certificates

def shared_certificates(cfg: ExperimentConfig, values: np.ndarray, op, level: float = math.inf) -> list:
    """Certificates that depend only on the stored solution; solve and verify share them."""
    if cfg.mode == "getoor":
        return [analysis.getoor_certificate(op, int(cfg.tolerances["envelope_exclusion"]), cfg.tolerances["getoor"])]
    tol = cfg.tolerances
    problem = cfg.problem(op.grid)
    sol = Solution(values=values, level=level, residual_norm=math.nan, newton_iters=0, continuation_trace=[])
    certs = [analysis.energy_growth_certificate(values, op, cfg.k_list, headroom=tol["energy_headroom"])]
    if not problem.outside_paper_regime:
        certs.append(analysis.tail_exponent_certificate(values, op.grid, cfg.s, cfg.k_list, slack=tol["tail_slack"]))
    certs.append(analysis.boundary_envelope_certificate(values, op.grid, cfg.s,
                                                        exclusion=int(tol["envelope_exclusion"]),
                                                        max_ratio=tol["envelope_max_ratio"]))
    if problem.mu_spec is None or problem.mu_spec.kind == "l1_density":
        certs.append(analysis.entropy_certificate(values, problem, op, seed=cfg.seed, tol=tol["entropy"]))
    certs.append(analysis.weak_form_certificate(sol, problem, op, seed=cfg.seed, tol=tol["weak_form"],
                                                schedule=cfg.schedule))
    certs.append(analysis.l2_apriori_certificate(values, op))
    return certs


def _norm_rows(cfg: ExperimentConfig, values, grid) -> list:
    rs = (analysis.tail_exponent(cfg.s),) if cfg.s < 0.5 else ()
    # the Hoelder seminorm of order s is reported only; it is too noisy on coarse meshes to assert
    return norm_report(values, grid, ps=(1, 2), gagliardo=((cfg.s, 2),), rs=rs, holder=(cfg.s,)).rows()


# ---------------------------------------------------------------- solve

def _solve_problem(cfg: ExperimentConfig, report: RunReport, op) -> tuple[np.ndarray, list]:
    """Runs the approximation ladder; returns the limit values and sequence rows."""
    problem = cfg.problem(op.grid)
    tol = cfg.tolerances
    t0 = time.perf_counter()
    result: LimitResult = approximation_limit(problem, cfg.n_schedule, op, tol=tol["newton"], schedule=cfg.schedule)
    report.timings["ladder"] = time.perf_counter() - t0
    levels = list(cfg.n_schedule)
    rows = []
    for i, n in enumerate(levels):
        nxt = levels[i + 1] if i + 1 < len(levels) else math.inf
        other = result.approximants[nxt].values if i + 1 < len(levels) else result.solution.values
        sol = result.approximants[n]
        rows.append((n, nxt, float(np.max(np.abs(other - sol.values))), sol.residual_norm, sol.newton_iters))
        report.solver.append({"n": n, "residual": sol.residual_norm, "newton_iters": sol.newton_iters,
                              "stages": len(sol.continuation_trace)})
    lim = result.solution
    report.solver.append({"n": math.inf, "residual": lim.residual_norm, "newton_iters": lim.newton_iters,
                          "stages": len(lim.continuation_trace)})

    t0 = time.perf_counter()
    report.certificates.extend(shared_certificates(cfg, lim.values, op))
    n_cmp = max(n for n in levels if math.isfinite(n))
    report.certificates.append(comparison_certificate(problem, int(n_cmp), op, tol=tol["newton"],
                                                      floor=tol["comparison_floor"]))
    sq = cfg.s * cfg.q
    if 0 < sq < 0.5:
        bumps = analysis.random_bumps(HARDY_SOBOLEV_TESTS, cfg.seed, cfg.a, cfg.b)
        report.certificates.append(analysis.hardy_sobolev_certificate(bumps, cfg.s, cfg.q, op.grid,
                                                                      spread=tol["hardy_sobolev_spread"]))
    report.timings["certificates"] = time.perf_counter() - t0
    return lim.values, rows


def run_solve(cfg: ExperimentConfig, output_dir: Optional[Path] = None) -> RunReport:
    out = Path(output_dir) if output_dir is not None else cfg.resolved_output_dir()
    report = RunReport(config=cfg.to_dict(), outside_paper_regime=cfg.s >= 0.5)
    grid = cfg.grid
    t0 = time.perf_counter()
    op = assemble_operator(grid, cfg.s)
    report.timings["assemble"] = time.perf_counter() - t0
    values, rows = None, []
    if cfg.mode == "getoor":
        values = ((grid.nodes - grid.a) * (grid.b - grid.nodes)) ** cfg.s
        report.certificates.extend(shared_certificates(cfg, values, op))
    else:
        try:
            values, rows = _solve_problem(cfg, report, op)
        except SolverError as exc:
            report.status = "solver_failure"
            report.trace = [str(exc)] + [_json_safe(list(t)) for t in (exc.trace or [])]
            if isinstance(exc, NonCauchyError):
                report.trace.insert(0, "non-Cauchy ladder")
    if values is not None:
        report.norms = _norm_rows(cfg, values, grid)

    out.mkdir(parents=True, exist_ok=True)
    if values is not None:
        _write(out / "solution.csv", _csv_text(
            SOLUTION_COLUMNS, zip(range(1, grid.n_cells), grid.nodes, grid.delta, values)))
        _write(out / "norms.csv", _csv_text(("kind", "parameter", "value"), report.norms))
    _write(out / "sequence.csv", _csv_text(SEQUENCE_COLUMNS, rows))
    _write(out / "report.json", dumps(report.to_dict()))
    _write(out / "timings.json", dumps(report.timings))
    return report


# ---------------------------------------------------------------- verify

def read_solution(path, grid) -> np.ndarray:
    """Reads solution.csv and checks it against ``grid``; raises InputError on any mismatch."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read solution file {path}: {exc}") from None
    if not rows or tuple(rows[0]) != SOLUTION_COLUMNS:
        raise InputError(f"solution header must be {','.join(SOLUTION_COLUMNS)}")
    body = rows[1:]
    if len(body) != grid.size:
        raise InputError(f"solution has {len(body)} rows, grid has {grid.size} nodes")
    try:
        table = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise InputError(f"non-numeric entry in solution file: {exc}") from None
    if table.shape[1] != len(SOLUTION_COLUMNS):
        raise InputError("solution rows must have four columns")
    if not np.array_equal(table[:, 0], np.arange(1, grid.n_cells)):
        raise InputError("node column does not match the grid")
    scale = 1e-12 * grid.length
    if np.max(np.abs(table[:, 1] - grid.nodes)) > scale or np.max(np.abs(table[:, 2] - grid.delta)) > scale:
        raise InputError("node coordinates do not match the grid")
    u = table[:, 3]
    if not np.all(np.isfinite(u)) or np.any(u <= 0):
        raise InputError("solution values must be finite and positive")
    return u


def run_verify(cfg: ExperimentConfig, solution_file, output_dir: Optional[Path] = None) -> RunReport:
    grid = cfg.grid
    values = read_solution(solution_file, grid)
    op = assemble_operator(grid, cfg.s)
    report = RunReport(config=cfg.to_dict(), outside_paper_regime=cfg.s >= 0.5, kind="verify")
    report.certificates = shared_certificates(cfg, values, op)
    report.norms = _norm_rows(cfg, values, grid)
    out = Path(output_dir) if output_dir is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "verify_report.json", dumps(report.to_dict()))
    return report


# ---------------------------------------------------------------- sweep

def _strip_axes(d: dict) -> dict:
    d = json.loads(json.dumps(d))
    for path in SWEEP_AXES:
        target = d
        for key in path[:-1]:
            target = target[key]
        target.pop(path[-1], None)
    return d


def check_sweep(configs: list) -> None:
    if not configs:
        raise InputError("sweep needs at least one config")
    base = _strip_axes(configs[0].to_dict())
    for cfg in configs[1:]:
        if _strip_axes(cfg.to_dict()) != base:
            raise InputError("sweep configs differ outside the declared axes (n_cells, s, q, n_schedule)")
    if len({cfg.resolved_output_dir() for cfg in configs}) != 1:
        raise InputError("sweep configs must share one output_dir")
    hashes = [cfg.hash() for cfg in configs]
    if len(set(hashes)) != len(hashes):
        raise InputError("sweep contains duplicate configs")


def _metric(report: RunReport) -> float:
    for c in report.certificates:
        if c.name == "getoor_consistency":
            return c.data["interior_deviation"]
    return math.nan


def _sweep_entry(args) -> tuple:
    cfg, out = args
    report = run_solve(cfg, out)
    metric = _metric(report)
    if math.isnan(metric):
        # last ladder gap against the discrete limit
        rows = (Path(out) / "sequence.csv").read_text(encoding="utf-8").splitlines()
        metric = float(rows[-1].split(",")[2]) if len(rows) > 1 else math.nan
    failed = ";".join(c.name for c in report.certificates if not c.passed)
    return (cfg.hash(), cfg.mode, cfg.n_cells, cfg.s, cfg.q, cfg.n_schedule[-1], report.exit_code,
            int(report.all_pass), metric, failed)


def fit_rates(rows) -> list:
    """Log-log slope of the metric against h for every group sharing (mode, s, q, n_max)."""
    groups = {}
    for r in rows:
        groups.setdefault((r[1], r[3], r[4], r[5]), []).append((r[2], r[8]))
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        pts = sorted(p for p in groups[key] if p[1] > 0 and math.isfinite(p[1]))
        if len({p[0] for p in pts}) < 2:
            continue
        h = 1.0 / np.array([p[0] for p in pts], dtype=float)
        rate = float(np.polyfit(np.log(h), np.log([p[1] for p in pts]), 1)[0])
        out.append((*key, len(pts), rate))
    return out


def run_sweep(configs: list, max_workers: Optional[int] = None) -> tuple[list, list, int]:
    check_sweep(configs)
    configs = sorted(configs, key=lambda c: c.hash())
    root = configs[0].resolved_output_dir()
    jobs = [(cfg, root / cfg.hash()) for cfg in configs]
    if len(jobs) == 1 or max_workers == 1:
        rows = [_sweep_entry(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_entry, jobs))
    rates = fit_rates(rows)
    root.mkdir(parents=True, exist_ok=True)
    _write(root / "sweep.csv", _csv_text(SWEEP_COLUMNS, rows))
    _write(root / "sweep_rates.csv", _csv_text(RATE_COLUMNS, rates))
    codes = [r[6] for r in rows]
    code = EXIT_SOLVER if EXIT_SOLVER in codes else (EXIT_CERT if EXIT_CERT in codes else EXIT_OK)
    return rows, rates, code


def load_configs(paths) -> list:
    return [load_config(p) for p in paths]


__all__ = ["RunReport", "InputError", "ConfigError", "run_solve", "run_verify", "run_sweep", "read_solution",
           "shared_certificates", "fit_rates", "check_sweep", "load_configs", "Certificate",
           "EXIT_OK", "EXIT_CERT", "EXIT_INPUT", "EXIT_SOLVER"]
