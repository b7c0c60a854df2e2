"""Truncation, the singular reaction, the nonlinearity h, and the data f, mu."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Grid


def truncate(k: float, s):
    """T_k(s): identity on [-k, k], clipped to +-k outside."""
    if not k > 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    out = np.clip(s, -k, k)
    return float(out) if np.ndim(out) == 0 else out


def singular_term(u, q: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("singular term needs a strictly positive argument")
    return u ** (-q)


@dataclass(frozen=True)
class HSpec:
    """h(t) = 1 / (t^gamma + t^theta).

    With c1 = c2 = 1 and both growth thresholds equal to 1 this form meets
    h <= c1 t^-gamma below the lower threshold and h <= c2 t^-theta above
    the upper one, is non-increasing, and tends to 0 at infinity.
    """

    gamma: float = 0.5
    theta: float = 2.0
    c1: float = 1.0
    c2: float = 1.0
    k_low: float = 1.0
    k_high: float = 1.0
    form: str = "canonical"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.c1 <= 0 or self.c2 <= 0 or self.k_low <= 0 or self.k_high <= 0:
            raise ValueError("growth constants and thresholds must be positive")
        if self.form != "canonical":
            raise ValueError(f"unknown h form {self.form!r}")


def _check_positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("h is only defined for t > 0")
    return t


def h_eval(spec: HSpec, t):
    t = _check_positive(t)
    out = 1.0 / (t**spec.gamma + t**spec.theta)
    return float(out) if out.ndim == 0 else out


def h_derivative(spec: HSpec, t):
    t = _check_positive(t)
    g, th = spec.gamma, spec.theta
    den = t**g + t**th
    return -(g * t ** (g - 1) + th * t ** (th - 1)) / den**2


def h_truncated(n: float, spec: HSpec, t):
    """T_n(h)(t) = min(h(t), n); ``n = inf`` disables the cap."""
    if not n >= 1:
        raise ValueError(f"truncation level must be >= 1, got {n}")
    out = np.minimum(h_eval(spec, t), n)
    return float(out) if np.ndim(out) == 0 else out


def h_truncated_derivative(n: float, spec: HSpec, t):
    t = np.asarray(t, dtype=float)
    return np.where(h_eval(spec, t) < n, h_derivative(spec, t), 0.0)


@dataclass(frozen=True)
class SourceSpec:
    """f(x) = amplitude (constant) or amplitude * delta(x)^-beta."""

    kind: str = "constant"
    amplitude: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "boundary_singular"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("source amplitude must be nonnegative")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")

    def nodal(self, grid: Grid) -> np.ndarray:
        if self.kind == "constant":
            return np.full(grid.size, float(self.amplitude))
        return self.amplitude * grid.delta ** (-self.beta)


def source_truncated(n: float, spec: SourceSpec, grid: Grid) -> np.ndarray:
    return np.minimum(spec.nodal(grid), n)


@dataclass(frozen=True)
class MeasureSpec:
    """Nonnegative measure: an L^1 density on the nodes, or a point mass.

    A density is stored as a nodal vector, so it is tied to one grid;
    :func:`density_on` builds one from a profile description.
    """

    kind: str = "l1_density"
    density: Optional[np.ndarray] = None
    atom_location: Optional[float] = None
    mass: float = 0.0

    def __post_init__(self):
        if self.kind == "l1_density":
            if self.density is None:
                raise ValueError("l1_density measure needs a density vector")
            d = np.asarray(self.density, dtype=float)
            if np.any(d < 0) or not np.all(np.isfinite(d)):
                raise ValueError("density must be finite and nonnegative")
            d.setflags(write=False)
            object.__setattr__(self, "density", d)
        elif self.kind == "dirac":
            if self.atom_location is None:
                raise ValueError("dirac measure needs an atom location")
            if self.mass < 0:
                raise ValueError("dirac mass must be nonnegative")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    def total_mass(self, grid: Grid) -> float:
        if self.kind == "l1_density":
            return float(grid.h * self.density.sum())
        return float(self.mass)

    def pair(self, phi: np.ndarray, grid: Grid) -> float:
        """<mu, phi> with the atom evaluated at its nearest node."""
        if self.kind == "l1_density":
            return float(grid.h * self.density @ phi)
        return float(self.mass * phi[_nearest_node(self.atom_location, grid)])


def zero_measure(grid: Grid) -> MeasureSpec:
    return MeasureSpec("l1_density", density=np.zeros(grid.size))


def density_on(grid: Grid, profile: dict) -> np.ndarray:
    """Nodal density from a profile description.

    Supported types: ``constant`` (value), ``power`` (amplitude *
    |x - center|^-exponent, exponent < 1), ``values`` (explicit list).
    """
    kind = profile.get("type", "constant")
    if kind == "constant":
        return np.full(grid.size, float(profile.get("value", 1.0)))
    if kind == "power":
        expo = float(profile["exponent"])
        if not 0 <= expo < 1:
            raise ValueError("power density needs exponent in [0, 1) to stay in L^1")
        dist = np.abs(grid.nodes - float(profile["center"]))
        if np.any(dist == 0):
            raise ValueError("power density singularity sits on a node")
        return float(profile.get("amplitude", 1.0)) * dist ** (-expo)
    if kind == "values":
        vals = np.asarray(profile["values"], dtype=float)
        if vals.shape != (grid.size,):
            raise ValueError(f"density needs {grid.size} values, got {vals.size}")
        return vals
    raise ValueError(f"unknown density profile {kind!r}")


def _nearest_node(x: float, grid: Grid) -> int:
    if not grid.a < x < grid.b:
        raise ValueError(f"atom location {x} is outside ({grid.a}, {grid.b})")
    return int(np.argmin(np.abs(grid.nodes - x)))


SCHEDULES = ("truncation", "mollified")


def measure_approximant(spec: MeasureSpec, n: float, grid: Grid, schedule: str = "truncation") -> np.ndarray:
    """Nodal approximant mu_n of the measure.

    ``truncation``: T_n(density) for densities, mass/h at the nearest node
    for a point mass (independent of n).

    ``mollified``: the truncation schedule smoothed by the three-point
    kernel [w, 1 - 2w, w] with w = 1/(2 n^2), zero outside the interval.
    The truncated density is capped at n, so the smoothing changes it by
    O(1/n) and both schedules share the same limit on a fixed grid.
    """
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    if not n >= 1:
        raise ValueError(f"approximation level must be >= 1, got {n}")
    if spec.kind == "l1_density":
        if spec.density.shape != (grid.size,):
            raise ValueError("density vector does not match the grid")
        base = np.minimum(spec.density, n)
    else:
        base = np.zeros(grid.size)
        base[_nearest_node(spec.atom_location, grid)] = spec.mass / grid.h
    if schedule == "truncation" or np.isinf(n):
        return base
    w = 1.0 / (2 * n * n)
    out = (1 - 2 * w) * base
    out[1:] += w * base[:-1]
    out[:-1] += w * base[1:]
    return out
