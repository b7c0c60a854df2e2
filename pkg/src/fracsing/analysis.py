"""Certificates for the a-priori structure of computed solutions.

Each certificate carries the numbers it was decided on. The entropy
check uses the full discrete pairing B(u, T_k(u - phi)) on the left,
not the pairing restricted to {|u - phi| < k}; test functions are
nodal vectors vanishing near the boundary in place of the smooth test
class.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .certificate import Certificate
from .grid import Grid
from .nonlinearity import h_eval, h_truncated, truncate
from .norms import distribution_function, gagliardo_seminorm
from .operator import OperatorMatrix, apply, bilinear_form, smallest_eigenvalue
from .solver import ProblemSpec, Solution

TEST_CLASS_NOTE = "test functions: nodal vectors vanishing near the boundary"
ENTROPY_LHS_NOTE = "entropy left side: full pairing B(u, T_k(u - phi))"


class RegimeError(ValueError):
    pass


def _values(w) -> np.ndarray:
    return np.asarray(w.values if isinstance(w, Solution) else w, dtype=float)


def truncation_energy(w, op: OperatorMatrix, k: float) -> float:
    tk = truncate(k, _values(w))
    return bilinear_form(op, tk, tk)


def energy_growth_certificate(w, op: OperatorMatrix, k_list: Sequence[float], headroom: float = 4.0,
                              slack: float = 1e-9) -> Certificate:
    """e(k) = B(T_k w, T_k w) must grow at most linearly in k.

    Passes when max_k e(k)/k stays below ``headroom`` times the median of
    e(k)/k over the three smallest levels, and the truncation inequality
    B(T_k w, T_k w) <= B(w, T_k w) holds at every level.
    """
    ks = [float(k) for k in k_list]
    if len(ks) < 3 or any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] <= 0:
        raise ValueError("k_list must hold at least three increasing positive levels")
    if ks[-1] < 10 * ks[0]:
        raise ValueError("k_list must span at least one decade")
    u = _values(w)
    energies, ratios, gaps = [], [], []
    for k in ks:
        tk = truncate(k, u)
        e = bilinear_form(op, tk, tk)
        energies.append(e)
        ratios.append(e / k)
        gaps.append(e - bilinear_form(op, u, tk))
    bound = headroom * float(np.median(ratios[:3]))
    worst_gap = max(gaps)
    passed = max(ratios) <= bound and worst_gap <= slack
    data = {"k": ks, "energy": energies, "ratio": ratios, "bound": bound,
            "max_ratio": max(ratios), "truncation_gap": worst_gap}
    return Certificate("energy_growth", passed, data, tolerance=headroom)


def tail_exponent(s: float, dim: int = 1) -> float:
    return dim / (dim - 2 * s)


def critical_exponent(s: float, dim: int = 1) -> float:
    return 2 * dim / (dim - 2 * s)


def tail_exponent_certificate(w, grid: Grid, s: float, k_list: Sequence[float], slack: float = 0.3) -> Certificate:
    """Log-log slope of |{w >= k}| against k versus -N/(N - 2s).

    Passes if the slope is at most -N/(N-2s) + slack, or if the
    distribution vanishes inside the k range.
    """
    if s >= 0.5:
        raise RegimeError(f"tail exponent needs N > 2s, got s={s} with N=1")
    target = tail_exponent(s)
    u = _values(w)
    ks = np.array([k for k in k_list if k >= 1], dtype=float)
    if ks.size == 0:
        raise ValueError("k_list needs levels >= 1")
    dist = np.array([distribution_function(u, k, grid) for k in ks])
    vanishes = bool(np.any(dist == 0))
    live = dist > 0
    slope = math.nan
    if np.count_nonzero(live) >= 2:
        slope = float(np.polyfit(np.log(ks[live]), np.log(dist[live]), 1)[0])
    passed = vanishes or (not math.isnan(slope) and slope <= -target + slack)
    data = {"k": ks.tolist(), "distribution": dist.tolist(), "slope": slope, "target_exponent": target,
            "critical_sobolev_exponent": critical_exponent(s), "vanishes": vanishes}
    return Certificate("tail_exponent", passed, data, tolerance=slack)


def envelope_constants(u, grid: Grid, s: float, exclusion: int = 2) -> tuple[float, float]:
    u = _values(u)
    if exclusion < 1:
        raise ValueError("exclusion must be at least one node")
    inner = slice(exclusion, grid.size - exclusion)
    ratio = u[inner] / grid.delta[inner] ** s
    if ratio.size == 0:
        raise ValueError("no nodes left after the boundary exclusion")
    return float(ratio.min()), float(ratio.max())


def boundary_envelope_certificate(u, grid: Grid, s: float, exclusion: int = 2, refined=None,
                                  max_ratio: float = 50.0) -> Certificate:
    """k1 delta^s <= u <= k2 delta^s away from ``exclusion`` nodes per end.

    ``refined`` is an optional (solution, grid) pair on a finer mesh; the
    spread k2/k1 must not grow under that refinement.
    """
    k1, k2 = envelope_constants(u, grid, s, exclusion)
    spread = k2 / k1 if k1 > 0 else math.inf
    data = {"k1": k1, "k2": k2, "spread": spread, "exclusion": exclusion}
    passed = k1 > 0 and spread <= max_ratio
    if refined is not None:
        fine_u, fine_grid = refined
        f1, f2 = envelope_constants(fine_u, fine_grid, s, exclusion)
        fine_spread = f2 / f1 if f1 > 0 else math.inf
        data.update(k1_refined=f1, k2_refined=f2, spread_refined=fine_spread)
        passed = passed and fine_spread <= spread * (1 + 1e-12)
    return Certificate("boundary_envelope", passed, data, tolerance=max_ratio)


def reaction_at(u, problem: ProblemSpec, level: float = math.inf, schedule: str = "truncation") -> np.ndarray:
    """Right-hand side u^{-q} + f_n h_n(u + 1/n) + mu_n at level n (inf: untruncated)."""
    u = _values(u)
    if math.isinf(level):
        react = problem.f_spec.nodal(problem.grid) * h_eval(problem.h_spec, u)
    else:
        react = problem.source(level) * h_truncated(level, problem.h_spec, u + 1.0 / level)
    return u ** (-problem.q) + react + problem.measure(level, schedule)


def entropy_residual(u, phi, k: float, problem: ProblemSpec, op: OperatorMatrix) -> float:
    """B(u, T_k(u - phi)) minus the data paired with T_k(u - phi).

    A nonpositive value certifies the entropy inequality for (phi, k).
    """
    u = _values(u)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != u.shape or u.shape != (op.size,):
        raise ValueError("u, phi and the operator must share one size")
    grid = problem.grid
    test = truncate(k, u - phi)
    lhs = bilinear_form(op, u, test)
    f = problem.f_spec.nodal(grid)
    rhs = grid.h * float((u ** (-problem.q) + f * h_eval(problem.h_spec, u)) @ test)
    if problem.mu_spec is not None:
        rhs += problem.mu_spec.pair(test, grid)
    return lhs - rhs


def random_test_functions(grid: Grid, count: int, rng: np.random.Generator, amplitude: float = 1.0,
                          margin_cells: int = 2) -> list:
    """Smooth random nodal vectors, zero within ``margin_cells`` of the boundary."""
    x = (grid.nodes - grid.a) / grid.length
    out = []
    for _ in range(count):
        modes = rng.integers(1, 6, size=3)
        coef = rng.normal(size=3)
        phi = sum(c * np.sin(m * np.pi * x) for c, m in zip(coef, modes))
        phi = amplitude * phi / max(np.max(np.abs(phi)), 1e-300)
        phi[:margin_cells] = 0.0
        phi[grid.size - margin_cells:] = 0.0
        out.append(phi)
    return out


def entropy_certificate(u, problem: ProblemSpec, op: OperatorMatrix, pairs: int = 50, seed: int = 0,
                        tol: float = 1e-6) -> Certificate:
    """Entropy inequality over seeded (phi, k): residual <= tol (1 + max|phi|)."""
    u = _values(u)
    rng = np.random.default_rng(seed)
    top = float(np.max(u))
    worst = -math.inf
    residuals = []
    for phi in random_test_functions(problem.grid, pairs, rng, amplitude=2 * top):
        phi = phi * rng.uniform(0, 1)
        k = float(rng.uniform(0.05, 2.0) * top)
        r = entropy_residual(u, phi, k, problem, op)
        scaled = r / (1 + float(np.max(np.abs(phi))))
        residuals.append(scaled)
        worst = max(worst, scaled)
    data = {"pairs": pairs, "seed": seed, "max_scaled_residual": worst,
            "mean_scaled_residual": float(np.mean(residuals))}
    return Certificate("entropy", worst <= tol, data, tolerance=tol, notes=(ENTROPY_LHS_NOTE, TEST_CLASS_NOTE))


def uniqueness_gap(u, v, k: float, op: OperatorMatrix) -> float:
    """B(T_k(u - v), T_k(u - v)), zero exactly when u = v."""
    u, v = _values(u), _values(v)
    if u.shape != v.shape or u.shape != (op.size,):
        raise ValueError("u, v and the operator must share one size")
    d = truncate(k, u - v)
    return bilinear_form(op, d, d)


def weak_form_certificate(sol: Solution, problem: ProblemSpec, op: OperatorMatrix, tests: int = 20,
                          seed: int = 0, tol: float = 1e-10, schedule: str = "truncation") -> Certificate:
    """|B(w, phi) - h sum(rhs phi)| <= tol ||phi||_1 for random test vectors."""
    rhs = reaction_at(sol, problem, sol.level, schedule)
    grid = problem.grid
    rng = np.random.default_rng(seed)
    worst = 0.0
    for phi in random_test_functions(grid, tests, rng):
        err = abs(bilinear_form(op, sol.values, phi) - grid.h * float(rhs @ phi))
        worst = max(worst, err / (grid.h * float(np.sum(np.abs(phi)))))
    data = {"tests": tests, "max_scaled_residual": worst, "level": sol.level}
    return Certificate("weak_form", worst <= tol, data, tolerance=tol, notes=(TEST_CLASS_NOTE,))


def l2_apriori_certificate(w, op: OperatorMatrix, lambda1: Optional[float] = None, slack: float = 1e-10) -> Certificate:
    """lambda_1 h sum w^2 <= B(w, w)."""
    u = _values(w)
    lam = smallest_eigenvalue(op).lambda1 if lambda1 is None else lambda1
    lhs = lam * op.grid.h * float(u @ u)
    energy = bilinear_form(op, u, u)
    return Certificate("l2_apriori", lhs <= energy + slack,
                       {"lambda1": lam, "lhs": lhs, "energy": energy}, tolerance=slack)


def hardy_sobolev_ratio(phi, s: float, q: float, grid: Grid) -> float:
    phi = np.asarray(phi, dtype=float)
    weighted = grid.h * float(np.sum(phi**2 / grid.delta ** (2 * s * q)))
    return weighted / gagliardo_seminorm(phi, s * q, 2, grid) ** 2


def random_bumps(count: int, seed: int, a: float = -1.0, b: float = 1.0) -> list:
    """Seeded smooth functions on (a, b) supported away from both endpoints."""
    rng = np.random.default_rng(seed)
    length = b - a
    funcs = []
    for _ in range(count):
        gap_l, gap_r = rng.uniform(0.03, 0.25, size=2) * length
        lo, hi = a + gap_l, b - gap_r
        modes = rng.integers(1, 5, size=2)
        coef = rng.normal(size=2)

        def phi(x, lo=lo, hi=hi, modes=modes, coef=coef):
            x = np.asarray(x, dtype=float)
            t = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
            cut = np.where((x > lo) & (x < hi), np.sin(np.pi * t) ** 2, 0.0)
            wave = 1.5 + coef[0] * np.cos(modes[0] * np.pi * t) + 0.5 * coef[1] * np.sin(modes[1] * np.pi * t)
            return cut * wave

        funcs.append(phi)
    return funcs


def hardy_sobolev_certificate(phi_set: Iterable[Callable], s: float, q: float, grid: Grid,
                              refine: int = 2, spread: float = 2.0) -> Certificate:
    """Weighted L^2 norm with weight delta^{-2sq} against the order-sq seminorm.

    Each test function is sampled on ``grid`` and on its refinement.
    Passes when the largest ratio stays within ``spread`` times the median and
    no single ratio moves by more than that factor under refinement. The
    embedding of order s into order sq is reported alongside.
    """
    if not 0 < s * q < 0.5:
        raise RegimeError(f"need 0 < s*q < 1/2, got {s * q}")
    fine = grid.refined(refine)
    coarse_r, fine_r, embed = [], [], []
    for phi in phi_set:
        vals = phi(grid.nodes)
        if vals[0] != 0 or vals[-1] != 0:
            raise ValueError("test functions must vanish at the boundary-adjacent nodes")
        if not np.any(vals):
            raise ValueError("test functions must not vanish identically")
        coarse_r.append(hardy_sobolev_ratio(vals, s, q, grid))
        fvals = phi(fine.nodes)
        fine_r.append(hardy_sobolev_ratio(fvals, s, q, fine))
        embed.append(gagliardo_seminorm(vals, s * q, 2, grid) / gagliardo_seminorm(vals, s, 2, grid))
    coarse_r, fine_r = np.array(coarse_r), np.array(fine_r)
    allr = np.concatenate([coarse_r, fine_r])
    med = float(np.median(allr))
    change = fine_r / coarse_r
    passed = (bool(np.all(np.isfinite(allr))) and float(allr.max()) <= spread * med
              and float(change.max()) <= spread and float(change.min()) >= 1 / spread)
    data = {"median_ratio": med, "max_ratio": float(allr.max()), "min_ratio": float(allr.min()),
            "max_refinement_change": float(change.max()), "min_refinement_change": float(change.min()),
            "max_embedding_ratio": float(max(embed)), "sq": s * q, "n_cells": grid.n_cells,
            "n_cells_refined": fine.n_cells}
    return Certificate("hardy_sobolev", passed, data, tolerance=spread)


def getoor_constant(s: float) -> float:
    """Constant value of the operator on ((x - a)(b - x))^s, any interval."""
    return float(4.0**s * math.gamma(1 + s) * math.gamma(0.5 + s) / math.sqrt(math.pi))


def getoor_deviation(op: OperatorMatrix) -> np.ndarray:
    """Relative nodal deviation of L applied to ((x - a)(b - x))^s from its exact constant."""
    grid = op.grid
    u = ((grid.nodes - grid.a) * (grid.b - grid.nodes)) ** op.s
    exact = getoor_constant(op.s)
    return np.abs(apply(op, u) - exact) / exact


def getoor_certificate(op: OperatorMatrix, exclusion: int = 2, tol: float = 0.05) -> Certificate:
    """Max relative deviation away from ``exclusion`` nodes per end must stay below ``tol``.

    ``interior_deviation`` (nodes at least a quarter of the half-length
    from the boundary) is reported for refinement studies.
    """
    grid = op.grid
    dev = getoor_deviation(op)
    inner = dev[exclusion: grid.size - exclusion]
    interior = dev[grid.delta >= grid.length / 8 * (1 - 1e-12)]
    worst = float(inner.max())
    data = {"max_deviation": worst, "interior_deviation": float(interior.max()),
            "exclusion": exclusion, "exact": getoor_constant(op.s), "n_cells": grid.n_cells}
    return Certificate("getoor_consistency", worst <= tol, data, tolerance=tol)
