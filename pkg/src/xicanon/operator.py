"""Discretization of the truncated integral operator with kernel h(xy) on (0, a).

The kernel ``K(x, y) = h(x y)`` is continuous for ``omega > 1`` but has
algebraic ridges ``(xy - n)**(omega-1)`` along the hyperbolas ``xy = n``.
Plain Gauss--Legendre Nystrom converges only algebraically there, so each
row is integrated by *product integration*: on the panel cut by a ridge the
singular term is integrated exactly against the Lagrange basis of that panel
by a Gauss--Jacobi rule, and the panels just right of the ridge use a
geometrically graded rule.  Panel breaks are placed where solutions of the
integral equations lose smoothness: ``1/a``, ``n/a``, ``k a/n`` and
``sqrt(n)``, with geometric grading toward each of them.

The eigenvalues of the truncated operator accumulate like ``k**-(omega+1/2)``
with alternating signs, so any finite matrix misses a tail of small
eigenvalues.  Determinants therefore get a trace correction: the exact
values of ``tr K`` and ``tr K^2`` reduce to one-dimensional integrals and
replace their discrete counterparts in ``log det(I + eps K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from . import quadrature as qd
from .errors import RegimeError, SingularError, SolveError, TruncationError
from .kernel import KernelContext, h_omega

#: Condition-number ceiling for (I +- H) before a solve is refused.
COND_LIMIT = 1e12
#: Default Gauss points per panel.
DEFAULT_NODES = 24
#: Geometric grading ratio and depth around singular points.
GRADING_RATIO = 0.05
GRADING_LEVELS = 2
#: Near-ridge treatment of neighbouring panels.
NEAR_PANELS = 3
NEAR_FACTOR = 3.0


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _singular_layout(a: float) -> list:
    """Coefficient rows ``(p, q, r)`` of points ``p a + q / a + r`` in (1/a, a)
    where solutions on (0, a) lose smoothness: ``n/a``, ``k a/n``, ``sqrt(n)``."""
    if a <= 1:
        return []
    N = int(math.floor(a * a + 1e-12))
    rows = {}
    for n in range(1, N + 1):
        rows.setdefault(n / a, (0.0, float(n), 0.0))
        rows.setdefault(math.sqrt(n), (0.0, 0.0, math.sqrt(n)))
        for k in range(1, N + 1):
            rows.setdefault(k * a / n, (k / n, 0.0, 0.0))
    lo, hi = 1.0 / a, a
    tol = 1e-12 * a
    return [rows[p] for p in sorted(rows) if lo + tol < p < hi - tol]


def singular_points(a: float) -> np.ndarray:
    """Points of (1/a, a) where solutions on (0, a) lose smoothness."""
    return _evaluate_layout(np.array(_singular_layout(a)).reshape(-1, 3), a)


def _evaluate_layout(layout: np.ndarray, a: float) -> np.ndarray:
    return layout @ np.array([a, 1.0 / a, 1.0])


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Gauss--Legendre grid on (0, a).

    Attributes
    ----------
    a : float
        Right end of the interval.
    nodes, weights : ndarray
        Gauss nodes and weights; weights sum to ``a``.
    panel_breaks : ndarray
        Increasing panel endpoints, starting at 0 and ending at ``a``.
    n_per_panel : int
        Gauss points per panel.
    refinement : int
        Number of times the base panel count was doubled.
    layout : ndarray
        Rows ``(p, q, r)`` with ``panel_breaks = p a + q / a + r``.
    """

    a: float
    nodes: np.ndarray
    weights: np.ndarray
    panel_breaks: np.ndarray
    n_per_panel: int
    refinement: int = 0
    layout: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def n_panels(self) -> int:
        return self.panel_breaks.size - 1

    def moved_to(self, a: float) -> "QuadratureGrid":
        """Same panel topology with every break re-evaluated at ``a``.

        Used for finite differences in ``a``: the discretization error then
        varies smoothly and cancels in the difference quotient.
        """
        layout = _drop_close(self.layout, a, 1e-12 * a)
        return _grid_from_breaks(a, _evaluate_layout(layout, a), self.n_per_panel,
                                 self.refinement, layout)


def build_grid(a: float, n_per_panel: int = DEFAULT_NODES, refinement: int = 0,
               grading_levels: int = GRADING_LEVELS, grading_ratio: float = GRADING_RATIO) -> QuadratureGrid:
    """Composite Gauss--Legendre grid on (0, a).

    The base panel count is ``max(8, ceil(8 a))`` uniform panels, doubled
    ``refinement`` times.  For ``a > 1`` the interval ``(0, 1/a)``, where
    the operator vanishes, is a single panel; breaks are added at every
    point returned by :func:`singular_points` and graded geometrically on
    both sides of each.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if n_per_panel < 4:
        raise ValueError("n_per_panel must be >= 4")
    P = max(8, int(math.ceil(8 * a))) * 2 ** refinement
    uniform = [(j / P, 0.0, 0.0) for j in range(P + 1)]
    if a <= 1:
        layout = np.array(uniform)
    else:
        lo = 1.0 / a
        sing = [(0.0, 1.0, 0.0), (1.0, 0.0, 0.0)] + _singular_layout(a)
        sing_vals = _evaluate_layout(np.array(sing), a)
        # uniform breaks that nearly coincide with a singular point would leave slivers
        spacing = a / P
        uni = [u for u in uniform if u[0] * a > lo and np.min(np.abs(sing_vals - u[0] * a)) > 0.3 * spacing]
        base = _drop_close(np.array([(0.0, 0.0, 0.0)] + uni + sing), a, 1e-9 * a)
        vals = _evaluate_layout(base, a)
        rows = list(map(tuple, base))
        for i in range(len(base) - 1):
            l, r = vals[i], vals[i + 1]
            if r <= lo * (1 + 1e-12):
                continue
            for k in range(1, grading_levels + 1):
                t = grading_ratio ** k
                if np.min(np.abs(sing_vals - l)) < 1e-9 * a:
                    rows.append(tuple((1 - t) * base[i] + t * base[i + 1]))
                if np.min(np.abs(sing_vals - r)) < 1e-9 * a:
                    rows.append(tuple(t * base[i] + (1 - t) * base[i + 1]))
        layout = np.array(rows)
        layout = layout[np.argsort(_evaluate_layout(layout, a), kind="stable")]
        layout = _drop_close(layout, a, 1e-12 * a)
    return _grid_from_breaks(a, _evaluate_layout(layout, a), n_per_panel, refinement, layout)


def _grid_from_breaks(a, breaks, n_per_panel, refinement, layout) -> QuadratureGrid:
    if np.any(np.diff(breaks) <= 0):
        raise ValueError("panel breaks are not increasing")
    x, w = qd.gauss_legendre(n_per_panel)
    left, right = breaks[:-1], breaks[1:]
    half = 0.5 * (right - left)
    nodes = (left[:, None] + half[:, None] * (x + 1.0)).ravel()
    weights = (half[:, None] * w).ravel()
    return QuadratureGrid(float(a), nodes, weights, breaks, n_per_panel, refinement, layout)


def _drop_close(layout: np.ndarray, a: float, tol: float) -> np.ndarray:
    """Sort layout rows by value at ``a`` and drop points closer than ``tol``.

    The first and last rows (0 and ``a``) are always kept.
    """
    vals = _evaluate_layout(layout, a)
    order = np.argsort(vals, kind="stable")
    layout, vals = layout[order], vals[order]
    keep = [0]
    for i in range(1, len(vals) - 1):
        if vals[i] - vals[keep[-1]] > tol:
            keep.append(i)
    if vals[-1] - vals[keep[-1]] <= tol and len(keep) > 1:
        keep.pop()
    keep.append(len(vals) - 1)
    return layout[keep]


# ---------------------------------------------------------------------------
# product-integration rows
# ---------------------------------------------------------------------------

def product_weights(ctx: KernelContext, grid: QuadratureGrid, targets: np.ndarray,
                    kernel: str = "h", jacobi_nodes: Optional[int] = None) -> np.ndarray:
    """Weights ``P`` with ``integral_0^a k(x_t y) f(y) dy ~ sum_j P[t, j] f(y_j)``.

    ``f`` is represented by its panel-wise Lagrange interpolant on the grid,
    and every ridge term ``c(n)/(xy) g(n/(xy))`` is integrated against that
    interpolant with a rule adapted to its ``(y - n/x)**alpha`` onset.

    Parameters
    ----------
    kernel : {"h", "h1"}
        Which kernel to integrate; ``alpha`` is ``omega - 1`` or ``omega``.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    om = ctx.omega
    alpha = om - 1.0 if kernel == "h" else om
    term = ctx.term if kernel == "h" else ctx.term1
    cof = ctx.G if kernel == "h" else ctx.G1
    npp = grid.n_per_panel
    m = jacobi_nodes or npp + 8
    X, W, br = grid.nodes, grid.weights, grid.panel_breaks
    a = grid.a
    ctx.check_range(float(targets.max()) * a)

    T = np.multiply.outer(targets, X)
    P = np.zeros_like(T)
    n_top = int(math.floor(float(targets.max()) * a))
    for n in range(1, n_top + 1):
        P += term(n, T)
    P *= W

    ref, _ = qd.gauss_legendre(npp)
    bary = qd.legendre_bary_weights(npp)
    sj, wj = qd.gauss_jacobi_left(m, alpha)
    gref, gw = qd.graded_reference_rule(6, 0.25, 12)
    Lg = qd.lagrange_basis(ref, bary, gref)
    cols = np.arange(npp)
    n_panels = br.size - 1
    for n in range(1, n_top + 1):
        c = n / targets
        rows = np.nonzero(c < a)[0]
        if rows.size == 0:
            continue
        cr = c[rows]
        xr = targets[rows]
        k = np.clip(np.searchsorted(br, cr, side="right") - 1, 0, n_panels - 1)
        l, r = br[k], br[k + 1]
        idx = (k * npp)[:, None] + cols
        # panel containing the ridge: swap the Gauss contribution for Gauss--Jacobi
        P[rows[:, None], idx] -= W[idx] * term(n, xr[:, None] * X[idx])
        half = 0.5 * (r - cr)
        y = cr[:, None] + half[:, None] * (sj + 1.0)
        smooth = ctx.c_table[n] / (xr[:, None] * y) * ((y + cr[:, None]) / y ** 2) ** alpha * cof(cr[:, None] / y)
        L = qd.lagrange_basis(ref, bary, 2.0 * (y - l[:, None]) / (r - l)[:, None] - 1.0)
        coef = (wj * smooth) * (half ** (alpha + 1.0))[:, None]
        P[rows[:, None], idx] += np.einsum("tm,tmj->tj", coef, L)
        # panels to the right that are close to the ridge: graded rule
        for off in range(1, NEAR_PANELS + 1):
            kk = k + off
            ok = kk < n_panels
            if not np.any(ok):
                break
            kk = np.where(ok, kk, 0)
            ll, rr = br[kk], br[kk + 1]
            near = ok & (ll - cr < NEAR_FACTOR * (rr - ll))
            if not np.any(near):
                break
            sel = np.nonzero(near)[0]
            rs, ks, xs = rows[sel], kk[sel], xr[sel]
            ls, wid = ll[sel], (rr - ll)[sel]
            idx2 = (ks * npp)[:, None] + cols
            P[rs[:, None], idx2] -= W[idx2] * term(n, xs[:, None] * X[idx2])
            yf = ls[:, None] + 0.5 * wid[:, None] * (gref + 1.0)
            vals = term(n, xs[:, None] * yf) * (0.5 * wid[:, None] * gw)
            P[rs[:, None], idx2] += vals @ Lg
    return P


# ---------------------------------------------------------------------------
# exact traces
# ---------------------------------------------------------------------------

def kernel_traces(ctx: KernelContext, a: float, nodes: int = 40) -> Tuple[float, float]:
    """Exact ``tr K = integral_0^a h(x^2) dx`` and ``tr K^2``.

    ``tr K^2 = integral int_(0,a)^2 h(xy)^2 dx dy`` collapses under
    ``t = xy`` to ``integral_1^{a^2} h(t)^2 log(a^2/t) dt``.
    """
    if a <= 1:
        return 0.0, 0.0
    om = ctx.omega
    a2 = a * a
    ctx.check_range(a2)
    t1 = 0.0
    n = 1
    while math.sqrt(n) < a:
        lo, hi = math.sqrt(n), min(math.sqrt(n + 1), a)
        xj, wj = qd.left_singular_rule(lo, hi, om - 1.0, nodes)
        sm = ctx.c_table[n] / xj ** 2 * ((xj + lo) * (xj ** 2 + n) / xj ** 4) ** (om - 1.0) * ctx.G(n / xj ** 2)
        t1 += np.sum(wj * sm)
        if n > 1:
            xl, wl = qd.legendre_rule(lo, hi, nodes)
            t1 += np.sum(wl * _rest(ctx, xl ** 2, n, ctx.term))
        n += 1
    t2 = 0.0
    n = 1
    while n < a2:
        lo, hi = float(n), min(n + 1.0, a2)

        def sigma(t):
            return ctx.c_table[n] / t * ((t + n) / t ** 2) ** (om - 1.0) * ctx.G(n / t)

        y2, w2 = qd.left_singular_rule(lo, hi, 2 * om - 2.0, nodes)
        t2 += np.sum(w2 * sigma(y2) ** 2 * np.log(a2 / y2))
        if n > 1:
            y1, w1 = qd.left_singular_rule(lo, hi, om - 1.0, nodes)
            t2 += np.sum(w1 * 2.0 * sigma(y1) * _rest(ctx, y1, n, ctx.term) * np.log(a2 / y1))
            yl, wl = qd.legendre_rule(lo, hi, nodes)
            t2 += np.sum(wl * _rest(ctx, yl, n, ctx.term) ** 2 * np.log(a2 / yl))
        n += 1
    return float(t1), float(t2)


def _rest(ctx: KernelContext, t: np.ndarray, n: int, term) -> np.ndarray:
    """Sum of the terms k < n, smooth on [n, n+1]."""
    out = np.zeros_like(t)
    for k in range(1, n):
        out += term(k, t)
    return out


# ---------------------------------------------------------------------------
# the discrete operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteOperator:
    """Nystrom matrix of the truncated operator on a grid.

    ``matrix`` is ``D^{1/2} P D^{-1/2}`` with ``D = diag(weights)`` and
    ``P`` the product-integration weights; away from ridges its entries
    equal ``sqrt(w_i) h(x_i x_j) sqrt(w_j)``, and it is symmetric up to the
    local quadrature corrections.

    ``trace`` and ``trace_sq`` hold the exact traces of the continuous
    operator and its square, used to correct determinants.
    """

    ctx: KernelContext
    grid: QuadratureGrid
    matrix: np.ndarray = field(repr=False)
    trace: float = 0.0
    trace_sq: float = 0.0

    @property
    def omega(self) -> float:
        return self.ctx.omega

    @property
    def a(self) -> float:
        return self.grid.a

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues sorted increasingly (real parts; imaginary parts are rounding)."""
        if not np.any(self.matrix):
            return np.zeros(self.grid.size)
        ev = np.linalg.eigvals(self.matrix)
        return np.sort(ev.real)

    @property
    def spectral_radius(self) -> float:
        ev = self.eigenvalues
        return float(max(abs(ev[0]), abs(ev[-1])))

    @property
    def asymmetry(self) -> float:
        """max |M - M^T| relative to max |M|."""
        M = self.matrix
        scale = np.abs(M).max()
        return float(np.abs(M - M.T).max() / scale) if scale > 0 else 0.0

    @cached_property
    def _factors(self):
        out = {}
        I = np.eye(self.grid.size)
        for eps in (1, -1):
            A = I + eps * self.matrix
            out[eps] = sla.lu_factor(A, check_finite=False)
        return out

    def log_det(self, eps: int, corrected: bool = True) -> Tuple[float, float]:
        """(sign, log|det(I + eps M)|), optionally trace-corrected."""
        lu, piv = self._factors[eps]
        d = np.diag(lu)
        sign = float(np.prod(np.sign(d)) * (-1) ** int(np.sum(piv != np.arange(piv.size))))
        logabs = float(np.sum(np.log(np.abs(d))))
        if corrected:
            M = self.matrix
            d1 = self.trace - float(np.trace(M))
            d2 = self.trace_sq - float(np.sum(M * M.T))
            logabs += eps * d1 - 0.5 * d2
        return sign, logabs

    def condition(self, eps: int, exact: bool = False) -> float:
        """2-norm condition number of (I + eps M).

        By default the extreme singular values are estimated by power
        iteration (reusing the LU factors), which is accurate to a few
        percent and far cheaper than a full SVD; ``exact=True`` uses svdvals.
        """
        if exact:
            sv = sla.svdvals(np.eye(self.grid.size) + eps * self.matrix, check_finite=False)
            return math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])
        smax, smin = self.singular_extremes(eps)
        return math.inf if smin == 0 else smax / smin

    def singular_extremes(self, eps: int, iterations: int = 60, rtol: float = 1e-3) -> Tuple[float, float]:
        """Power-iteration estimates of the largest and smallest singular values of I + eps M."""
        if eps in self._cond:
            return self._cond[eps]
        M = self.matrix
        fac = self._factors[eps]
        rng = np.random.default_rng(12345)
        start = rng.standard_normal(self.grid.size)

        def apply(v):
            w = v + eps * (M @ v)
            return w + eps * (M.T @ w)

        def apply_inv(v):
            w = sla.lu_solve(fac, v, trans=1, check_finite=False)
            return sla.lu_solve(fac, w, check_finite=False)

        def top(op):
            v = start / np.linalg.norm(start)
            lam = 0.0
            for _ in range(iterations):
                w = op(v)
                new = float(np.linalg.norm(w))
                if not np.isfinite(new) or new == 0.0:
                    return new
                v = w / new
                if abs(new - lam) <= rtol * new:
                    return new
                lam = new
            return lam

        smax = math.sqrt(top(apply))
        inv = top(apply_inv)
        smin = 0.0 if not np.isfinite(inv) else (math.inf if inv == 0 else 1.0 / math.sqrt(inv))
        self._cond[eps] = (smax, smin)
        return smax, smin

    @cached_property
    def _cond(self) -> dict:
        return {}

    def solve(self, eps: int, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self._factors[eps], rhs, check_finite=False)


def discretize(ctx: KernelContext, grid: QuadratureGrid, corrected_traces: bool = True) -> DiscreteOperator:
    """Assemble the discrete operator on ``grid``.

    Raises
    ------
    RegimeError
        If ``omega <= 1``; the kernel is then not continuous.
    """
    if ctx.omega <= 1:
        raise RegimeError(f"operator pipeline needs omega > 1 (got {ctx.omega})")
    N = grid.size
    if grid.a <= 1:
        return DiscreteOperator(ctx, grid, np.zeros((N, N)), 0.0, 0.0)
    P = product_weights(ctx, grid, grid.nodes)
    sw = np.sqrt(grid.weights)
    M = P * sw[:, None] / sw[None, :]
    t1, t2 = kernel_traces(ctx, grid.a) if corrected_traces else (float(np.trace(M)), float(np.sum(M * M.T)))
    return DiscreteOperator(ctx, grid, M, t1, t2)


def operator_at(ctx: KernelContext, a: float, n_per_panel: int = DEFAULT_NODES,
                refinement: int = 0) -> DiscreteOperator:
    """Shorthand for ``discretize(ctx, build_grid(a, ...))``."""
    return discretize(ctx, build_grid(a, n_per_panel, refinement))


def det_pair(op: DiscreteOperator, corrected: bool = True) -> Tuple[float, float]:
    """(det(I + H), det(I - H)) on the discretization.

    Raises
    ------
    SingularError
        If either determinant is not positive.
    """
    if op.a <= 1:
        return 1.0, 1.0
    out = []
    for eps in (1, -1):
        sign, logabs = op.log_det(eps, corrected)
        if sign <= 0:
            raise SingularError(f"det(I {'+' if eps > 0 else '-'} H) is not positive at a={op.a}")
        out.append(math.exp(logabs))
    return out[0], out[1]


def log_det_pair(op: DiscreteOperator, corrected: bool = True) -> Tuple[float, float]:
    """(log det(I + H), log det(I - H)); same checks as :func:`det_pair`."""
    if op.a <= 1:
        return 0.0, 0.0
    out = []
    for eps in (1, -1):
        sign, logabs = op.log_det(eps, corrected)
        if sign <= 0:
            raise SingularError(f"det(I {'+' if eps > 0 else '-'} H) is not positive at a={op.a}")
        out.append(logabs)
    return out[0], out[1]


def frobenius_bound(op: DiscreteOperator, nodes: int = 40) -> Tuple[float, float]:
    """(||M||_F^2, 2 log a * integral_1^{a^2} h^2) for the Hilbert--Schmidt bound."""
    M = op.matrix
    a = op.a
    if a <= 1:
        return 0.0, 0.0
    ctx = op.ctx
    total = 0.0
    n = 1
    a2 = a * a
    while n < a2:
        lo, hi = float(n), min(n + 1.0, a2)
        om = ctx.omega

        def sigma(t):
            return ctx.c_table[n] / t * ((t + n) / t ** 2) ** (om - 1.0) * ctx.G(n / t)

        y2, w2 = qd.left_singular_rule(lo, hi, 2 * om - 2.0, nodes)
        total += np.sum(w2 * sigma(y2) ** 2)
        if n > 1:
            y1, w1 = qd.left_singular_rule(lo, hi, om - 1.0, nodes)
            total += np.sum(w1 * 2.0 * sigma(y1) * _rest(ctx, y1, n, ctx.term))
            yl, wl = qd.legendre_rule(lo, hi, nodes)
            total += np.sum(wl * _rest(ctx, yl, n, ctx.term) ** 2)
        n += 1
    return float(np.sum(M * M)), float(2.0 * math.log(a) * total)


# ---------------------------------------------------------------------------
# Fredholm series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesResult:
    """Truncated Fredholm series ``d(lam) = sum_n d_n lam**n``.

    Attributes
    ----------
    value : float
        Partial sum through ``order``.
    coefficients : ndarray
        ``d_0 .. d_order``.
    term_bounds : ndarray
        Hadamard bounds ``n**(n/2) M1**n / n!`` for the same indices.
    tail_bound : float
        Sum of the Hadamard bounds beyond ``order`` times ``|lam|**n``.
    M1 : float
        ``(a - 1/a) * max |h|`` on ``[1, a^2]``.
    """

    value: float
    coefficients: np.ndarray
    term_bounds: np.ndarray
    tail_bound: float
    M1: float


def series_traces(ctx: KernelContext, a: float, order: int, n_per_panel: int = 20,
                  refinement: int = 1) -> np.ndarray:
    """``tr K^k`` for ``k = 1..order``.

    The first two are exact one-dimensional integrals; higher ones come from
    a discretization on a grid independent of the default one.  Their
    eigenvalue tails decay like ``k**(-3 (omega + 1/2))`` and are negligible.
    """
    t1, t2 = kernel_traces(ctx, a)
    out = np.zeros(order)
    if order >= 1:
        out[0] = t1
    if order >= 2:
        out[1] = t2
    if order >= 3:
        op = discretize(ctx, build_grid(a, n_per_panel, refinement), corrected_traces=False)
        ev = np.linalg.eigvals(op.matrix)
        for k in range(3, order + 1):
            out[k - 1] = float(np.sum(ev ** k).real)
    return out


def fredholm_series(ctx: KernelContext, a: float, lam: float, order: int,
                    tol: Optional[float] = None) -> SeriesResult:
    """Truncated Fredholm series for ``d(lam) = det(I - lam K)``.

    The coefficients ``d_n = (-1)^n / n! int det[K(x_i, x_j)] dx`` are
    evaluated through the Plemelj--Smithies recursion in the traces
    ``tr K^k``, which is algebraically identical to the n-fold integrals.

    Raises
    ------
    ValueError
        If ``order`` is outside ``0..6``.
    TruncationError
        If ``tol`` is given and the Hadamard tail bound exceeds it.
    """
    if not 0 <= order <= 6:
        raise ValueError("order must lie in 0..6")
    if a <= 1 or lam == 0 or order == 0:
        coeffs = np.zeros(order + 1)
        coeffs[0] = 1.0
        return SeriesResult(1.0, coeffs, np.ones(order + 1), 0.0, 0.0)
    tr = series_traces(ctx, a, order)
    e = np.zeros(order + 1)
    e[0] = 1.0
    for n in range(1, order + 1):
        e[n] = sum((-1) ** (k - 1) * e[n - k] * tr[k - 1] for k in range(1, n + 1)) / n
    coeffs = np.array([(-1) ** n * e[n] for n in range(order + 1)])
    value = float(np.sum(coeffs * lam ** np.arange(order + 1)))
    tgrid = np.linspace(1.0, a * a, 2001)[1:]
    M1 = (a - 1.0 / a) * float(np.max(np.abs(h_omega(tgrid, ctx))))
    bounds = np.array([_hadamard(n, M1) for n in range(order + 1)])
    tail = 0.0
    n = order + 1
    while True:
        b = _hadamard(n, M1) * abs(lam) ** n
        tail += b
        if b < 1e-18 * max(tail, 1e-300) or n > 400:
            break
        n += 1
    if tol is not None and tail > tol:
        raise TruncationError(f"Hadamard tail bound {tail:.3g} exceeds {tol:.3g}")
    return SeriesResult(value, coeffs, bounds, tail, M1)


def _hadamard(n: int, M1: float) -> float:
    if n == 0:
        return 1.0
    return math.exp(0.5 * n * math.log(n) + n * math.log(max(M1, 1e-300)) - math.lgamma(n + 1))


# ---------------------------------------------------------------------------
# integral equations
# ---------------------------------------------------------------------------

class PhiExtension:
    """Extension of a grid solution to every ``x > 0``.

    ``phi(x) = h(a x) - eps * integral_0^a h(x y) phi(y) dy``, evaluated by
    product integration against the grid interpolant; it vanishes for
    ``x <= 1/a``.
    """

    def __init__(self, ctx: KernelContext, grid: QuadratureGrid, values: np.ndarray, eps: int):
        self.ctx = ctx
        self.grid = grid
        self.values = values
        self.eps = eps

    def __call__(self, x):
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(arr)
        a = self.grid.a
        live = arr * a > 1.0
        if np.any(live):
            xs = arr[live]
            P = product_weights(self.ctx, self.grid, xs)
            out[live] = h_omega(a * xs, self.ctx) - self.eps * (P @ self.values)
        return float(out[0]) if np.ndim(x) == 0 else out


@dataclass
class PhiSolution:
    """Solution of ``phi + eps * integral_0^a h(xy) phi(y) dy = h(a x)`` on (0, a)."""

    eps: int
    a: float
    grid_values: np.ndarray
    extension: Callable
    residual: float = 0.0
    condition: float = 1.0

    def at_endpoint(self) -> float:
        """phi(a), the value entering mu(a)."""
        return float(self.extension(self.a))


def solve_phi(op: DiscreteOperator, eps: int) -> PhiSolution:
    """Solve the second-kind equation on the grid and attach the extension.

    For ``a <= 1`` the operator vanishes and ``phi(x) = h(a x)``.

    Raises
    ------
    SolveError
        If the 2-norm condition number of ``I + eps H`` exceeds ``1e12`` or
        the normwise backward error ``|r| / (|A| |x| + |b|)`` exceeds
        ``1e-10`` after iterative refinement.
    """
    if eps not in (1, -1):
        raise ValueError("eps must be +1 or -1")
    ctx, grid, a = op.ctx, op.grid, op.a
    if a <= 1:
        vals = h_omega(a * grid.nodes, ctx)
        ext = lambda x: h_omega(a * np.asarray(x, dtype=float), ctx)  # noqa: E731
        return PhiSolution(eps, a, vals, ext)
    cond = op.condition(eps)
    if cond > COND_LIMIT:
        raise SolveError(f"condition number {cond:.3g} of I {'+' if eps > 0 else '-'} H exceeds {COND_LIMIT:.0e}")
    sw = np.sqrt(grid.weights)
    rhs = h_omega(a * grid.nodes, ctx)
    b = sw * rhs
    psi = op.solve(eps, b)
    anorm = op.singular_extremes(eps)[0]
    for _ in range(3):
        resid = psi + eps * (op.matrix @ psi) - b
        rel = float(np.linalg.norm(resid) / (anorm * np.linalg.norm(psi) + np.linalg.norm(b)))
        if rel < 1e-14:
            break
        psi = psi - op.solve(eps, resid)
    if rel > 1e-10:
        raise SolveError(f"normwise backward error {rel:.3g} exceeds 1e-10")
    vals = psi / sw
    ext = PhiExtension(ctx, grid, vals, eps)
    return PhiSolution(eps, a, vals, ext, rel, cond)


def mu_of_a(ctx: KernelContext, a: float, n_per_panel: int = DEFAULT_NODES, refinement: int = 0) -> float:
    """mu(a) = a phi_a^+(a) + a phi_a^-(a); zero for ``a <= 1``."""
    if a <= 1:
        return 0.0
    op = operator_at(ctx, a, n_per_panel, refinement)
    return a * (solve_phi(op, 1).at_endpoint() + solve_phi(op, -1).at_endpoint())


def log_det_derivatives(ctx: KernelContext, a: float, rel_step: float = 1e-4,
                        n_per_panel: int = DEFAULT_NODES, refinement: int = 0) -> Tuple[float, float]:
    """Centered differences of ``log det(I + H)`` and ``log det(I - H)`` in ``a``.

    Both evaluations use the grid built at ``a`` moved to ``a +- h``, so the
    panel topology is shared and the discretization error cancels.
    """
    h = rel_step * a
    grid = build_grid(a, n_per_panel, refinement)
    plus = log_det_pair(discretize(ctx, grid.moved_to(a + h)))
    minus = log_det_pair(discretize(ctx, grid.moved_to(a - h)))
    return (plus[0] - minus[0]) / (2 * h), (plus[1] - minus[1]) / (2 * h)


# ---------------------------------------------------------------------------
# applying the full operator to compactly supported functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    """Smooth bump ``exp(-1/(1-t^2))`` on ``[lo, hi]`` scaled by ``height``."""

    lo: float
    hi: float
    height: float = 1.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        t = (2.0 * y - self.lo - self.hi) / (self.hi - self.lo)
        inside = np.abs(t) < 1.0
        out = np.zeros_like(y)
        out[inside] = self.height * np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    @property
    def support(self) -> Tuple[float, float]:
        return self.lo, self.hi


def _ridge_integral(ctx: KernelContext, x: float, f: Callable, lo: float, hi: float,
                    kernel: str, nodes: int = 48) -> float:
    """integral_lo^hi k(x y) f(y) dy with each ridge onset handled by Gauss--Jacobi."""
    om = ctx.omega
    alpha = om - 1.0 if kernel == "h" else om
    term = ctx.term if kernel == "h" else ctx.term1
    cof = ctx.G if kernel == "h" else ctx.G1
    ctx.check_range(x * hi)
    ridges = [n / x for n in range(1, int(math.floor(x * hi)) + 1) if lo < n / x < hi]
    edges = [lo] + ridges + [hi]
    n_first = int(math.floor(x * lo)) + 1  # first ridge index inside (lo, hi)
    total = 0.0
    for i, (l, r) in enumerate(zip(edges[:-1], edges[1:])):
        if r <= l:
            continue
        top = int(math.floor(x * l + 1e-12))  # active terms on (l, r]
        singular = i > 0  # left edge is a ridge of index n_first + i - 1
        n_sing = n_first + i - 1 if singular else None
        yl, wl = qd.legendre_rule(l, r, nodes)
        smooth = np.zeros_like(yl)
        for n in range(1, top + 1):
            if n != n_sing:
                smooth += term(n, x * yl)
        total += np.sum(wl * smooth * f(yl))
        if singular:
            c = n_sing / x
            yj, wj = qd.left_singular_rule(c, r, alpha, nodes)
            sm = ctx.c_table[n_sing] / (x * yj) * ((yj + c) / yj ** 2) ** alpha * cof(c / yj)
            total += np.sum(wj * sm * f(yj))
    return float(total)


def watson_apply(ctx: KernelContext, f: Callable, x: float, support: Tuple[float, float],
                 method: str = "direct", step: float = 1e-4) -> float:
    """Apply the full operator with kernel h(xy) to a compactly supported ``f``.

    ``method="direct"`` integrates ``h(x y) f(y)``.  ``method="watson"``
    uses the once-integrated kernel: ``sqrt(x) d/dx [sqrt(x) integral h1(x y)
    f(y) dy]`` with a centered difference of step ``step * x``.
    """
    if ctx.omega <= 1:
        raise RegimeError("watson_apply needs omega > 1")
    lo, hi = support
    if x * hi <= 1.0:
        return 0.0
    if method == "direct":
        return _ridge_integral(ctx, x, f, lo, hi, "h")
    if method != "watson":
        raise ValueError("method must be 'direct' or 'watson'")
    d = step * x

    def F(t):
        return math.sqrt(t) * _ridge_integral(ctx, t, f, lo, hi, "h1")

    return math.sqrt(x) * (F(x + d) - F(x - d)) / (2 * d)


def isometry_ratio(ctx: KernelContext, f: Callable, support: Tuple[float, float],
                   R: float, panels_per_unit: int = 2, nodes: int = 16) -> float:
    """||H f||_{L^2(0,R)} / ||f||_{L^2} for a compactly supported ``f``."""
    lo, hi = support
    start = 1.0 / hi
    if R <= start:
        return 0.0
    brk = {start, R}
    for n in range(1, int(math.floor(R * hi)) + 1):
        for b in (n / lo, n / hi):
            if start < b < R:
                brk.add(b)
    brk = np.array(sorted(brk))
    total = 0.0
    for l, r in zip(brk[:-1], brk[1:]):
        k = max(1, int(math.ceil((r - l) * panels_per_unit)))
        for j in range(k):
            xs, ws = qd.legendre_rule(l + (r - l) * j / k, l + (r - l) * (j + 1) / k, nodes)
            vals = np.array([_ridge_integral(ctx, xv, f, lo, hi, "h", nodes=24) for xv in xs])
            total += np.sum(ws * vals ** 2)
    fy, fw = qd.legendre_rule(lo, hi, 200)
    norm_f = math.sqrt(np.sum(fw * f(fy) ** 2))
    return math.sqrt(total) / norm_f
