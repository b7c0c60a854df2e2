"""Discrete restricted fractional Laplacian on a uniform interval mesh.

The operator is collocated at the interior nodes. The nodal vector is
interpolated by hat functions (zero at both endpoints and outside the
interval) and the kernel |x - y|^{-1-2s} is integrated exactly against
each hat. On the two cells touching the collocation node the principal
value is taken analytically through the centred second difference, and
the mass of the kernel over the exterior of the interval is added to the
diagonal in closed form.

On a uniform mesh this gives a symmetric Toeplitz matrix plus a diagonal,
with the M-matrix sign pattern and strictly positive row sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import gamma, roots_jacobi

from .grid import Grid

# Offsets (in cells) at or beyond which hat integrals switch from the
# closed form, which cancels badly for large offsets, to Gauss-Legendre.
_GAUSS_FROM = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def normalization_constant(s: float) -> float:
    """C_{1,s} = 4^s Gamma(1/2 + s) / (sqrt(pi) |Gamma(-s)|)."""
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return float(4.0**s * gamma(0.5 + s) / (np.sqrt(np.pi) * abs(gamma(-s))))


def tail_weight(x, grid: Grid, s: float):
    """Kernel mass of the exterior of (a, b) seen from x, without C_{1,s}.

    Equals ((x - a)^{-2s} + (b - x)^{-2s}) / (2s).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= grid.a) or np.any(x >= grid.b):
        raise ValueError("tail_weight needs x strictly inside the interval")
    out = ((x - grid.a) ** (-2 * s) + (grid.b - x) ** (-2 * s)) / (2 * s)
    return float(out) if out.ndim == 0 else out


def _power_integrals(lo, hi, s):
    """Closed forms of int t^{-1-2s} dt and int t^{-2s} dt over [lo, hi]."""
    two_s = 2 * s
    i0 = (lo ** (-two_s) - hi ** (-two_s)) / two_s
    if abs(1 - two_s) < 1e-14:
        i1 = np.log(hi / lo)
    else:
        i1 = (hi ** (1 - two_s) - lo ** (1 - two_s)) / (1 - two_s)
    return i0, i1


def _hat_moments(m: np.ndarray, s: float) -> np.ndarray:
    """int phi(t) |t|^{-1-2s} dt for a unit hat centred at offset m (h = 1).

    For m = 1 only the half of the hat outside the near cell counts.
    """
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    small = m < _GAUSS_FROM
    ms = m[small]
    # falling half, t in [m, m+1], phi = m + 1 - t
    i0, i1 = _power_integrals(ms, ms + 1, s)
    val = (ms + 1) * i0 - i1
    # rising half, t in [m-1, m], phi = t - (m - 1); skipped for m = 1
    rise = ms >= 2
    lo = np.where(rise, ms - 1, 1.0)
    i0, i1 = _power_integrals(lo, np.where(rise, ms, 2.0), s)
    val += np.where(rise, i1 - (ms - 1) * i0, 0.0)
    out[small] = val
    if np.any(~small):
        ml = m[~small][:, None]
        tau = 0.5 * (_GL_X + 1)  # nodes on [0, 1]
        w = 0.5 * _GL_W
        kern = (1 - tau) * ((ml + tau) ** (-1 - 2 * s) + (ml - tau) ** (-1 - 2 * s))
        out[~small] = kern @ w
    return out


def _layer_integral(m: np.ndarray, s: float) -> np.ndarray:
    """int_0^1 (t^s - t) (m - t)^{-1-2s} dt for m >= 2."""
    xj, wj = roots_jacobi(30, 0.0, s)  # weight (1 + x)^s on [-1, 1]
    tj = 0.5 * (xj + 1)
    wj = wj / 2 ** (1 + s)
    tl = 0.5 * (_GL_X + 1)
    wl = 0.5 * _GL_W
    m = np.asarray(m, dtype=float)[:, None]
    return (m - tj) ** (-1 - 2 * s) @ wj - (tl * (m - tl) ** (-1 - 2 * s)) @ wl


def boundary_layer(grid: Grid, s: float) -> np.ndarray:
    """Diagonal correction for the boundary cells, without C_{1,s}.

    The hat interpolant is linear on [a, x_1], whereas functions in the
    solution class behave like delta^s there. Replacing the ramp by
    u(x_1) (delta / h)^s and writing u(x_1) ~ u(x_i) (h / delta_i)^s moves
    the correction onto the diagonal, which keeps the matrix symmetric.
    Nodes within two cells of an endpoint get no correction from that side.
    """
    out = np.zeros(grid.size)
    for m in grid.boundary_cells():
        far = m >= 2
        mf = m[far].astype(float)
        out[far] += _layer_integral(mf, s) * mf ** (-s)
    return out * grid.h ** (-2 * s)


@dataclass(frozen=True)
class OperatorMatrix:
    grid: Grid
    s: float
    c_ns: float
    matrix: np.ndarray
    tail: np.ndarray
    layer: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def outside_paper_regime(self) -> bool:
        return self.s >= 0.5

    @cached_property
    def _cholesky(self):
        return linalg.cho_factor(self.matrix, lower=True, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._cholesky, rhs, check_finite=False)

    @cached_property
    def torsion(self) -> np.ndarray:
        """Solution of L w = 1; strictly positive."""
        return self.solve(np.ones(self.size))


def assemble_operator(grid: Grid, s: float, boundary_correction: bool = True) -> OperatorMatrix:
    c = normalization_constant(s)
    n = grid.size
    h = grid.h
    scale = c * h ** (-2 * s)

    offsets = np.arange(1, n, dtype=float)
    column = np.empty(n)
    column[1:] = -scale * _hat_moments(offsets, s)
    if n > 1:
        column[1] -= scale / (2 - 2 * s)
    # Near cells (2 / (2 - 2s)) plus far-field kernel mass inside the
    # interval; the exterior tail cancels the interval truncation of the
    # far-field mass, leaving a constant.
    tail = c * tail_weight(grid.nodes, grid, s)
    far_inside = scale * 2 / (2 * s) - tail
    column[0] = 0.0
    mat = linalg.toeplitz(column)
    diag = scale / (1 - s) + far_inside + tail
    layer = c * boundary_layer(grid, s) if boundary_correction else np.zeros(n)
    mat[np.diag_indices(n)] = diag - layer
    mat.setflags(write=False)
    tail.setflags(write=False)
    layer.setflags(write=False)
    return OperatorMatrix(grid=grid, s=float(s), c_ns=c, matrix=mat, tail=tail, layer=layer)


def apply(op: OperatorMatrix, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (op.size,):
        raise ValueError(f"expected a vector of length {op.size}, got shape {u.shape}")
    return op.matrix @ u


def bilinear_form(op: OperatorMatrix, u, v) -> float:
    """h u^T L v, the discrete analogue of the fractional energy pairing."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (op.size,) or v.shape != (op.size,):
        raise ValueError(f"expected vectors of length {op.size}")
    return float(op.grid.h * (u @ (op.matrix @ v)))


@dataclass(frozen=True)
class SpectralEstimate:
    lambda1: float
    eigvec: np.ndarray
    residual: float
    iterations: int


class ConvergenceError(RuntimeError):
    pass


def smallest_eigenvalue(op: OperatorMatrix, tol: float = 1e-10, max_iter: int = 2000) -> SpectralEstimate:
    """Principal eigenpair by inverse iteration.

    The inverse of an M-matrix is entrywise positive, so starting from a
    positive vector the iterates stay positive and converge to the ground
    state.
    """
    v = np.ones(op.size) / np.sqrt(op.size)
    for it in range(1, max_iter + 1):
        y = op.solve(v)
        v = y / np.linalg.norm(y)
        lv = op.matrix @ v
        lam = float(v @ lv)
        res = float(np.linalg.norm(lv - lam * v))
        if res <= tol:
            return SpectralEstimate(lam, v, res, it)
    raise ConvergenceError(f"inverse iteration did not reach residual {tol} in {max_iter} steps (last {res:.3e})")
