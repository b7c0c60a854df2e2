"""Experiment configuration: a JSON file, validated in full at parse time."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .grid import Grid, build_grid
from .nonlinearity import SCHEDULES, HSpec, MeasureSpec, SourceSpec, density_on
from .solver import ProblemSpec

SCHEMA_VERSION = 1
OUTPUT_ENV = "FRACSING_OUTPUT_DIR"
MODES = ("problem", "getoor")

DEFAULT_TOLERANCES = {
    "newton": 1e-10,
    "entropy": 1e-6,
    "weak_form": 1e-8,
    "energy_headroom": 4.0,
    "tail_slack": 0.3,
    "envelope_max_ratio": 50.0,
    "envelope_exclusion": 2,
    "comparison_floor": -1e-9,
    "getoor": 0.05,
    "hardy_sobolev_spread": 2.0,
}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    a: float
    b: float
    n_cells: int
    s: float
    q: float
    h_spec: HSpec = field(default_factory=HSpec)
    f_spec: SourceSpec = field(default_factory=SourceSpec)
    mu: Optional[dict] = None
    n_schedule: tuple = (1, 2, 4, 8, 16, 32)
    k_list: tuple = (1, 2, 4, 8, 16)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    output_dir: str = "out"
    mode: str = "problem"
    schedule: str = "truncation"

    @property
    def grid(self) -> Grid:
        return build_grid(self.a, self.b, self.n_cells)

    def measure(self, grid: Optional[Grid] = None) -> Optional[MeasureSpec]:
        if self.mu is None:
            return None
        grid = grid or self.grid
        if self.mu["kind"] == "dirac":
            return MeasureSpec("dirac", atom_location=self.mu["atom_location"], mass=self.mu["mass"])
        return MeasureSpec("l1_density", density=density_on(grid, self.mu["profile"]))

    def problem(self, grid: Optional[Grid] = None) -> ProblemSpec:
        grid = grid or self.grid
        return ProblemSpec(q=self.q, s=self.s, grid=grid, h_spec=self.h_spec, f_spec=self.f_spec,
                           mu_spec=self.measure(grid))

    def to_dict(self) -> dict:
        """Canonical echo; output_dir is left out so it never changes a hash or report."""
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "grid": {"a": self.a, "b": self.b, "n_cells": self.n_cells},
            "s": self.s,
            "q": self.q,
            "h_spec": {"gamma": self.h_spec.gamma, "theta": self.h_spec.theta, "c1": self.h_spec.c1,
                       "c2": self.h_spec.c2, "k_low": self.h_spec.k_low, "k_high": self.h_spec.k_high,
                       "form": self.h_spec.form},
            "f_spec": {"kind": self.f_spec.kind, "amplitude": self.f_spec.amplitude, "beta": self.f_spec.beta},
            "mu_spec": self.mu,
            "n_schedule": list(self.n_schedule),
            "k_list": list(self.k_list),
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
            "schedule": self.schedule,
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


def _number(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number, got {v!r}")
    return float(v)


def _mu(raw) -> Optional[dict]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("mu_spec must be an object or null")
    kind = raw.get("kind", "l1_density")
    if kind == "dirac":
        return {"kind": "dirac", "atom_location": _number(raw, "atom_location"), "mass": _number(raw, "mass")}
    if kind == "l1_density":
        profile = raw.get("profile", {"type": "constant", "value": 1.0})
        if not isinstance(profile, dict):
            raise ConfigError("mu_spec.profile must be an object")
        return {"kind": "l1_density", "profile": profile}
    raise ConfigError(f"unknown mu_spec kind {kind!r}")


def _levels(raw, key, minimum) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{key} must be a nonempty list")
    vals = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= minimum or not math.isfinite(v):
            raise ConfigError(f"{key} entries must be finite numbers >= {minimum}, got {v!r}")
        vals.append(int(v) if float(v).is_integer() else float(v))
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{key} must be strictly increasing")
    return tuple(vals)


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")
    mode = raw.get("mode", "problem")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("missing grid object")
    n_cells = grid.get("n_cells")
    if isinstance(n_cells, bool) or not isinstance(n_cells, int):
        raise ConfigError(f"grid.n_cells must be an integer, got {n_cells!r}")
    k_list = _levels(raw.get("k_list", [1, 2, 4, 8, 16]), "k_list", 1e-300)
    if len(k_list) < 3 or k_list[-1] < 10 * k_list[0]:
        raise ConfigError("k_list needs at least three levels spanning a decade")
    schedule = raw.get("schedule", "truncation")
    if schedule not in SCHEDULES:
        raise ConfigError(f"schedule must be one of {SCHEDULES}")
    tolerances = dict(DEFAULT_TOLERANCES)
    extra = raw.get("tolerances", {})
    if not isinstance(extra, dict):
        raise ConfigError("tolerances must be an object")
    unknown = set(extra) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    for key in extra:
        tolerances[key] = _number(extra, key)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir must be a nonempty string")
    try:
        cfg = ExperimentConfig(
            a=_number(grid, "a"), b=_number(grid, "b"), n_cells=n_cells,
            s=_number(raw, "s"), q=_number(raw, "q", 0.5),
            h_spec=HSpec(**raw.get("h_spec", {})),
            f_spec=SourceSpec(**raw.get("f_spec", {})),
            mu=_mu(raw.get("mu_spec", {"kind": "l1_density"})),
            n_schedule=_levels(raw.get("n_schedule", [1, 2, 4, 8, 16, 32]), "n_schedule", 1),
            k_list=k_list,
            tolerances=tolerances, seed=seed, output_dir=output_dir, mode=mode, schedule=schedule,
        )
        # build everything once so upstream range checks fire here, not mid-run
        cfg.problem()
    except TypeError as exc:
        raise ConfigError(f"bad field: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return from_dict(raw)
