"""Lebesgue, fractional Sobolev and Marcinkiewicz norms of nodal functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

_GX, _GW = np.polynomial.legendre.leggauss(6)
_GX = 0.5 * (_GX + 1)
_GW = 0.5 * _GW


def _check_length(u, grid: Grid) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"expected a vector of length {grid.size}, got shape {u.shape}")
    return u


def lp_norm(u, p: float, grid: Grid) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    u = _check_length(u, grid)
    return float((grid.h * np.sum(np.abs(u) ** p)) ** (1 / p))


def distribution_function(u, t: float, grid: Grid) -> float:
    """Measure of {|u| >= t}, each node carrying weight h."""
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t}")
    u = _check_length(u, grid)
    return float(grid.h * np.count_nonzero(np.abs(u) >= t))


def marcinkiewicz_norm(u, r: float, grid: Grid) -> float:
    """sup_t t * |{|u| >= t}|^{1/r}, attained at one of the values |u_i|."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    u = _check_length(u, grid)
    levels = np.sort(np.abs(u))[::-1]
    levels = levels[levels > 0]
    if levels.size == 0:
        return 0.0
    # the k-th largest level has at least k nodes at or above it; ties
    # only enlarge the count, and the last tied entry carries it
    counts = np.arange(1, levels.size + 1)
    return float(np.max(levels * (grid.h * counts) ** (1 / r)))


def _line_integral_abs_pow(a, b, p):
    """int_0^1 |a + b t|^p dt, vectorized."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    end = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        gen = (np.abs(end) ** (p + 1) * np.sign(end) - np.abs(a) ** (p + 1) * np.sign(a)) / ((p + 1) * b)
    scale = np.maximum(np.abs(a), np.abs(end))
    flat = np.abs(b) <= 1e-12 * np.maximum(scale, 1e-300)
    return np.where(flat, np.abs(a) ** p, gen)


def gagliardo_seminorm(u, s1: float, p: float, grid: Grid) -> float:
    """(iint_{D_Omega} |U(x) - U(y)|^p / |x - y|^{1 + s1 p} dx dy)^{1/p}.

    U is the hat interpolant of the nodal values, zero outside the
    interval. Cell pairs are integrated separately: same-cell and
    touching-cell pairs with their singular parts in closed form, distant
    pairs and the exterior interaction by Gauss-Legendre.
    """
    if not 0 < s1 < 1:
        raise ValueError(f"s1 must lie in (0, 1), got {s1}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    u = _check_length(u, grid)
    h = grid.h
    alpha = s1 * p
    vals = np.concatenate(([0.0], u, [0.0]))
    n = grid.n_cells
    left = vals[:-1]
    slope_jump = vals[1:] - vals[:-1]  # U across each cell, per unit xi
    slopes = slope_jump / h

    total = 0.0
    # same cell: |m|^p |x - y|^{p - 1 - alpha} over [0, h]^2
    beta = p - 1 - alpha
    total += np.sum(np.abs(slopes) ** p) * 2 * h ** (beta + 2) / ((beta + 1) * (beta + 2))

    # touching cells I, I+1; a, b are distances from the shared node
    m_left = slopes[:-1]
    m_right = slopes[1:]
    # triangle a + b <= h in polar form
    ang = _line_integral_abs_pow(m_right, m_left - m_right, p)
    near = np.sum(ang) * h ** (p - alpha + 1) / (p - alpha + 1)
    # rest of the square: a = h - rho*sig, b = h - rho*(1 - sig), r = 2h - rho
    rho = h * _GX[:, None]
    sig = _GX[None, :]
    wts = (h * _GW[:, None]) * _GW[None, :] * rho
    a_pt = h - rho * sig
    b_pt = h - rho * (1 - sig)
    kern = (2 * h - rho) ** (-1 - alpha)
    diff = m_left[:, None, None] * a_pt + m_right[:, None, None] * b_pt
    far_touch = np.sum(np.abs(diff) ** p * (kern * wts))
    total += 2 * (near + far_touch)

    # separated cells, offset d >= 2
    xk = _GX[:, None]
    yl = _GX[None, :]
    w2 = _GW[:, None] * _GW[None, :]
    ux = left[:, None] + slope_jump[:, None] * _GX[None, :]  # (cells, gauss)
    for d in range(2, n):
        kern = ((d + yl - xk) * h) ** (-1 - alpha) * w2
        dx = ux[: n - d, :, None] - ux[d:, None, :]
        total += 2 * h * h * np.sum(np.abs(dx) ** p * kern)

    # exterior: 2 int_Omega |U|^p ((x - a)^-alpha + (b - x)^-alpha) / alpha
    centres = np.arange(n)[:, None] + _GX[None, :]  # in cells from a
    xa = centres * h
    xb = (n - centres) * h
    upow = np.abs(ux) ** p
    ext_left = (xa[1:] ** -alpha * upow[1:]) @ _GW
    ext_right = (xb[:-1] ** -alpha * upow[:-1]) @ _GW
    ext = h * (np.sum(ext_left) + np.sum(ext_right)) / alpha
    # boundary cells against their own endpoint: U = u_1 xi, exact
    ext += (abs(u[0]) ** p + abs(u[-1]) ** p) * h ** (1 - alpha) / (alpha * (p - alpha + 1))
    total += 2 * ext
    return float(max(total, 0.0) ** (1 / p))


def holder_seminorm(u, alpha: float, grid: Grid) -> float:
    """max |u_i - u_j| / |x_i - x_j|^alpha over all node pairs, endpoints (value 0) included."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    u = _check_length(u, grid)
    vals = np.concatenate(([0.0], u, [0.0]))
    best = 0.0
    for d in range(1, vals.size):
        best = max(best, float(np.max(np.abs(vals[d:] - vals[:-d]))) / (d * grid.h) ** alpha)
    return best


@dataclass
class NormReport:
    lp: dict = field(default_factory=dict)
    gagliardo: dict = field(default_factory=dict)
    marcinkiewicz: dict = field(default_factory=dict)
    holder: dict = field(default_factory=dict)

    def rows(self):
        """(kind, parameter, value) rows in a fixed order."""
        out = [("lp", f"{p:g}", v) for p, v in sorted(self.lp.items())]
        out += [("gagliardo", f"{s1:g}:{p:g}", v) for (s1, p), v in sorted(self.gagliardo.items())]
        out += [("marcinkiewicz", f"{r:g}", v) for r, v in sorted(self.marcinkiewicz.items())]
        out += [("holder", f"{a:g}", v) for a, v in sorted(self.holder.items())]
        return out


def norm_report(u, grid: Grid, ps=(1, 2), gagliardo=(), rs=(), holder=()) -> NormReport:
    rep = NormReport()
    for p in ps:
        rep.lp[float(p)] = lp_norm(u, p, grid)
    for s1, p in gagliardo:
        rep.gagliardo[(float(s1), float(p))] = gagliardo_seminorm(u, s1, p, grid)
    for r in rs:
        rep.marcinkiewicz[float(r)] = marcinkiewicz_norm(u, r, grid)
    for a in holder:
        rep.holder[float(a)] = holder_seminorm(u, a, grid)
    return rep
