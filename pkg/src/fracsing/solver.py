"""Positive solutions of the regularized singular problems.

Every solve runs a continuation in a desingularizing shift eps: stage j
solves L w = (w + eps_j)^{-q} + G(w) with eps_j = 2^{-j}, warm-started
from the previous stage, until eps falls below 1e-12 max(w); a final
stage with eps = 0 then gives the unshifted solution. Each stage is a
damped Newton iteration whose step is halved until the iterate stays
positive and the residual norm drops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg, optimize

from .certificate import Certificate
from .grid import Grid, compact_subset
from .nonlinearity import (
    HSpec,
    MeasureSpec,
    SourceSpec,
    h_truncated,
    h_truncated_derivative,
    measure_approximant,
    source_truncated,
)
from .operator import OperatorMatrix, smallest_eigenvalue

DEFAULT_TOL = 1e-10
MAX_NEWTON = 200
MAX_HALVINGS = 50
EPS_FLOOR = 1e-12


class SolverError(RuntimeError):
    """Newton stagnation or an inconsistent approximation ladder."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


@dataclass(frozen=True)
class ProblemSpec:
    q: float
    s: float
    grid: Grid
    h_spec: HSpec = field(default_factory=HSpec)
    f_spec: SourceSpec = field(default_factory=SourceSpec)
    mu_spec: Optional[MeasureSpec] = None

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")

    @property
    def outside_paper_regime(self) -> bool:
        return self.s >= 0.5

    def source(self, n: float) -> np.ndarray:
        return source_truncated(n, self.f_spec, self.grid)

    def measure(self, n: float, schedule: str = "truncation") -> np.ndarray:
        if self.mu_spec is None:
            return np.zeros(self.grid.size)
        return measure_approximant(self.mu_spec, n, self.grid, schedule)


@dataclass
class Solution:
    values: np.ndarray
    level: float
    residual_norm: float
    newton_iters: int
    continuation_trace: list = field(default_factory=list)


# A reaction maps (w, eps) to (G(w), dG/dw) evaluated componentwise.
Reaction = Callable[[np.ndarray, float], tuple]


def _no_reaction(g: np.ndarray) -> Reaction:
    zero = np.zeros_like(g)
    return lambda w, eps: (g, zero)


def _newton_stage(op, w, eps, q, q_weight, reaction, tol, positive):
    mat = op.matrix

    def residual(v):
        g, dg = reaction(v, eps)
        sing = q_weight * (v + eps) ** (-q) if q_weight else 0.0
        return mat @ v - sing - g, dg

    r, dg = residual(w)
    iters = 0
    while np.max(np.abs(r)) > tol:
        if iters >= MAX_NEWTON:
            raise SolverError(f"Newton cap of {MAX_NEWTON} reached at eps={eps:.3e}")
        jdiag = -dg
        if q_weight:
            jdiag = jdiag + q_weight * q * (w + eps) ** (-q - 1)
        jac = mat.copy()
        jac[np.diag_indices_from(jac)] += jdiag
        try:
            step = linalg.solve(jac, -r, assume_a="pos", check_finite=False)
        except linalg.LinAlgError:
            step = linalg.solve(jac, -r, check_finite=False)
        rnorm = np.linalg.norm(r)
        t = 1.0
        for _ in range(MAX_HALVINGS):
            trial = w + t * step
            if not positive or np.all(trial > 0):
                r_new, dg_new = residual(trial)
                if np.linalg.norm(r_new) < rnorm:
                    break
            t *= 0.5
        else:
            raise SolverError(f"Newton stagnated at eps={eps:.3e}: no decrease in {MAX_HALVINGS} damped steps")
        w, r, dg = trial, r_new, dg_new
        iters += 1
    return w, float(np.max(np.abs(r))), iters


def _continuation(op, reaction, q, tol, q_weight=1.0, initial=None, positive=True) -> Solution:
    w = op.torsion.copy() if initial is None else np.array(initial, dtype=float)
    trace = []
    total = 0
    eps = 1.0
    while True:
        try:
            w, res, it = _newton_stage(op, w, eps, q, q_weight, reaction, tol, positive)
        except SolverError as exc:
            raise SolverError(str(exc), trace) from None
        trace.append((eps, res))
        total += it
        if eps == 0.0:
            break
        eps *= 0.5
        if eps <= EPS_FLOOR * np.max(w):
            eps = 0.0
    return Solution(values=w, level=math.nan, residual_norm=res, newton_iters=total, continuation_trace=trace)


def solve_regularized(op: OperatorMatrix, g, q: float, tol: float = DEFAULT_TOL,
                      q_weight: float = 1.0, initial=None) -> Solution:
    """Positive solution of L w = q_weight * w^{-q} + g for bounded g >= 0."""
    g = np.asarray(g, dtype=float)
    if g.shape != (op.size,):
        raise ValueError("g does not match the operator size")
    if np.any(g < 0):
        raise ValueError("g must be nonnegative")
    if q_weight == 0:
        w = op.solve(g)
        res = float(np.max(np.abs(op.matrix @ w - g)))
        return Solution(w, math.nan, res, 1, [(0.0, res)])
    return _continuation(op, _no_reaction(g), q, tol, q_weight, initial)


def _reaction(problem: ProblemSpec, n: float, schedule: str = "truncation") -> Reaction:
    """f_n h_n(w + 1/n) + mu_n; at n = inf the shift is the continuation eps."""
    f_n = problem.source(n)
    mu_n = problem.measure(n, schedule)
    hs = problem.h_spec
    finite = not math.isinf(n)

    def react(w, eps):
        arg = w + (1.0 / n if finite else eps)
        return (f_n * h_truncated(n, hs, arg) + mu_n,
                f_n * h_truncated_derivative(n, hs, arg))

    return react


def fixed_point_map(problem: ProblemSpec, n: float, v, op: OperatorMatrix,
                    tol: float = DEFAULT_TOL, schedule: str = "truncation", initial=None) -> Solution:
    """Phi(v): the solution w of L w = w^{-q} + f_n h_n(|v| + 1/n) + mu_n."""
    v = np.asarray(v, dtype=float)
    g = problem.source(n) * h_truncated(n, problem.h_spec, np.abs(v) + 1.0 / n) + problem.measure(n, schedule)
    sol = solve_regularized(op, g, problem.q, tol, initial=initial)
    sol.level = n
    return sol


def l2_bound(problem: ProblemSpec, n: float, op: OperatorMatrix, lambda1: Optional[float] = None) -> float:
    """Upper bound on h sum w^2 valid for every image of the fixed-point map.

    Testing the equation with w and using h_n <= n gives
    lambda_1 X^2 <= |Omega|^{(1+q)/2} X^{1-q} + ||f_n n + mu_n||_2 X with
    X the discrete L^2 norm of w, so X is below the root of
    lambda_1 X - |Omega|^{(1+q)/2} X^{-q} - ||f_n n + mu_n||_2.
    """
    grid = problem.grid
    lam = smallest_eigenvalue(op).lambda1 if lambda1 is None else lambda1
    q = problem.q
    size = grid.h * grid.size
    a_coef = size ** ((1 + q) / 2)
    g_max = problem.source(n) * n + problem.measure(n)
    g_coef = math.sqrt(grid.h * float(g_max @ g_max))

    def fn(x):
        return lam * x - a_coef * x ** (-q) - g_coef

    hi = 1.0
    while fn(hi) < 0:
        hi *= 2
    root = optimize.brentq(fn, 1e-300 ** (1 / (1 + q)), hi, xtol=1e-14, rtol=1e-14)
    return root * root


def solve_approximant(problem: ProblemSpec, n: float, op: OperatorMatrix, tol: float = DEFAULT_TOL,
                      schedule: str = "truncation", initial=None) -> Solution:
    """w_n solving L w = w^{-q} + f_n h_n(w + 1/n) + mu_n by Newton on the full system.

    ``n = math.inf`` solves the untruncated discrete problem.
    """
    if not n >= 1:
        raise ValueError(f"approximation level must be >= 1, got {n}")
    sol = _continuation(op, _reaction(problem, n, schedule), problem.q, tol, initial=initial)
    sol.level = n
    return sol


def picard_approximant(problem: ProblemSpec, n: float, op: OperatorMatrix, tol: float = 1e-12,
                       max_iter: int = 500, schedule: str = "truncation") -> tuple[Solution, list]:
    """Independent route to w_n: iterate v <- Phi(v) from the torsion function.

    Returns the last iterate and the history of max|Phi(v) - v|.
    """
    v = op.torsion.copy()
    history = []
    for _ in range(max_iter):
        sol = fixed_point_map(problem, n, v, op, tol=min(tol, DEFAULT_TOL) * 1e-2, schedule=schedule, initial=v)
        step = float(np.max(np.abs(sol.values - v)))
        history.append(step)
        v = sol.values
        if step <= tol:
            return sol, history
    raise SolverError(f"Picard iteration over Phi did not settle below {tol} in {max_iter} steps", history)


def solve_lower_barrier(problem: ProblemSpec, n: float, op: OperatorMatrix, tol: float = DEFAULT_TOL) -> Solution:
    """v_n solving L v = f_n h_n(v + 1/n), the singular term dropped."""
    f_n = problem.source(n)
    if not np.any(f_n > 0):
        zero = np.zeros(op.size)
        return Solution(zero, n, 0.0, 0, [])
    hs = problem.h_spec

    def react(v, eps):
        arg = v + 1.0 / n
        return f_n * h_truncated(n, hs, arg), f_n * h_truncated_derivative(n, hs, arg)

    sol = _continuation(op, react, problem.q, tol, q_weight=0.0)
    sol.level = n
    return sol


def comparison_certificate(problem: ProblemSpec, n: int, op: OperatorMatrix, margin: float = 0.25,
                           tol: float = DEFAULT_TOL, floor: float = -1e-9) -> Certificate:
    """Checks w_n >= v_n, v_{n+1} >= v_n and reports C_K = min_K v_1."""
    w_n = solve_approximant(problem, n, op, tol).values
    v_n = solve_lower_barrier(problem, n, op, tol).values
    v_next = solve_lower_barrier(problem, n + 1, op, tol).values
    v_1 = v_n if n == 1 else solve_lower_barrier(problem, 1, op, tol).values
    subset = compact_subset(problem.grid, margin).indices
    data = {
        "n": n,
        "margin": margin,
        "min_w_minus_v": float(np.min(w_n - v_n)),
        "min_vnext_minus_v": float(np.min(v_next - v_n)),
        "c_k": float(np.min(v_1[subset])),
        "min_w_on_k": float(np.min(w_n[subset])),
    }
    passed = all(data[key] >= floor for key in ("min_w_minus_v", "min_vnext_minus_v", "c_k"))
    return Certificate("comparison", passed, data, tolerance=-floor)


@dataclass
class LimitResult:
    solution: Solution
    approximants: dict
    gaps: list
    limit_gaps: list
    monotone: Optional[bool]


class NonCauchyError(SolverError):
    pass


def approximation_limit(problem: ProblemSpec, n_schedule, op: OperatorMatrix, tol: float = DEFAULT_TOL,
                        schedule: str = "truncation", monotone_slack: float = 1e-9) -> LimitResult:
    """Runs the ladder w_n over ``n_schedule`` and the untruncated discrete limit.

    ``gaps`` holds max|w_n - w_prev| between consecutive levels; a gap that
    exceeds the one three steps earlier is reported as non-Cauchy. For
    density data under the truncation schedule the ladder must also
    increase in n.
    """
    levels = list(n_schedule)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("n_schedule must be a nonempty increasing list")
    approx = {n: solve_approximant(problem, n, op, tol, schedule) for n in levels}
    limit = solve_approximant(problem, math.inf, op, tol, schedule, initial=None)
    gaps = [(a, b, float(np.max(np.abs(approx[b].values - approx[a].values)))) for a, b in zip(levels, levels[1:])]
    limit_gaps = [(n, float(np.max(np.abs(limit.values - approx[n].values)))) for n in levels]

    scale = float(np.max(limit.values))
    if len(gaps) >= 3 and gaps[-1][2] > gaps[-3][2] + 1e-12 * scale:
        raise NonCauchyError(f"ladder gaps are not decreasing: {[g[2] for g in gaps[-3:]]}", gaps)

    monotone = None
    mu = problem.mu_spec
    if schedule == "truncation" and (mu is None or mu.kind == "l1_density"):
        seq = [approx[n].values for n in levels] + [limit.values]
        drops = [float(np.min(b - a)) for a, b in zip(seq, seq[1:])]
        monotone = all(d >= -monotone_slack for d in drops)
        if not monotone:
            raise SolverError(f"ladder is not increasing in n: min steps {drops}", gaps)
    return LimitResult(limit, approx, gaps, limit_gaps, monotone)
