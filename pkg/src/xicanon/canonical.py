"""The canonical system built from the truncated operators.

Notation
--------
``m(a)`` is the structure function, ``mu(a) = a m'(a) / m(a)`` its
logarithmic derivative.  The pair ``(A_a, B_a)`` satisfies::

    a dA/da =  z m^2 B
    a dB/da = -z m^-2 A

which is stiff in ``a`` because ``m`` grows like ``exp(15)`` by ``a = 2``.
The evolution therefore works in the gauge ``u = A / m``, ``v = m B``::

    a du/da = -mu u + z v
    a dv/da =  mu v - z u

``mu`` is continuous but behaves like ``(a - sqrt(n))**(omega-1)`` just
right of each ``sqrt(n)``.  On every segment ``[sqrt(n), sqrt(n+1)]`` the
substitution ``a = l + L s**2`` makes it smooth in ``s``, so ``mu`` is
sampled at Chebyshev--Lobatto points in ``s`` and both the interpolation
and the integral giving ``log m`` are spectrally accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from . import operator as opmod
from .errors import ContourError, ConvergenceError, RegimeError, StepError
from .kernel import KernelContext, h_omega, mellin_antiderivative
from .specfun import ComplexValue, ab_omega, theta_omega, xi

#: Chebyshev--Lobatto points per sqrt(n) segment used to sample mu.
SEGMENT_POINTS = 13
#: Largest a accepted without an explicit override.
A_MAX_DEFAULT = 4.0


# ---------------------------------------------------------------------------
# m-curve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Segment:
    """Chebyshev fit of mu on part of a sqrt(n) segment.

    The segment ``[base, base + length]`` is parametrized by
    ``a = base + length * s**2``; this piece covers ``s`` in ``[s0, s1]``.
    """

    base: float
    length: float
    s0: float
    s1: float
    mu_coef: np.ndarray
    logm_coef: np.ndarray  # antiderivative of mu(a)/a da/dx, zero at the left end
    logm_start: float

    @property
    def left(self) -> float:
        return self.base + self.length * self.s0 ** 2

    @property
    def right(self) -> float:
        return self.base + self.length * self.s1 ** 2

    def _x(self, a):
        s = np.sqrt(np.clip((np.asarray(a, dtype=float) - self.base) / self.length, 0.0, 1.0))
        return 2.0 * (s - self.s0) / (self.s1 - self.s0) - 1.0

    def mu(self, a):
        return cheb.chebval(self._x(a), self.mu_coef)

    def log_m(self, a):
        return self.logm_start + cheb.chebval(self._x(a), self.logm_coef)


def segment_breaks(a_max: float) -> List[float]:
    """1 and every sqrt(n) in (1, a_max), then a_max."""
    out = [1.0]
    n = 2
    while math.sqrt(n) < a_max - 1e-12:
        out.append(math.sqrt(n))
        n += 1
    out.append(float(a_max))
    return out


def lobatto_s(points: int = SEGMENT_POINTS) -> np.ndarray:
    """Chebyshev--Lobatto points mapped to s in [0, 1], increasing."""
    k = np.arange(points)
    return 0.5 * (1.0 - np.cos(np.pi * k / (points - 1)))


@dataclass(frozen=True)
class MCurve:
    """Samples of mu and m on an increasing grid of ``a``.

    Attributes
    ----------
    omega : float
    a_samples : ndarray
        Increasing sample points.
    mu_values : ndarray
        mu(a_i) (zero for a <= 1).
    m_values : ndarray
        m(a_i) from ``source``.
    source : {"determinant_ratio", "exp_integral"}
    alt_m_values : ndarray or None
        m(a_i) from the other source when both were computed.
    """

    omega: float
    a_samples: np.ndarray
    mu_values: np.ndarray
    m_values: np.ndarray
    source: str = "exp_integral"
    alt_m_values: Optional[np.ndarray] = None
    segments: Tuple[_Segment, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.source not in ("determinant_ratio", "exp_integral"):
            raise ValueError("source must be 'determinant_ratio' or 'exp_integral'")
        a = np.asarray(self.a_samples, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0):
            raise ValueError("a_samples must be a non-empty increasing array")
        if np.any(~np.isfinite(self.m_values)) or np.any(np.asarray(self.m_values) <= 0):
            raise ValueError("m must be finite and strictly positive")

    @property
    def agreement(self) -> float:
        """max relative difference between the two sources (nan if only one)."""
        if self.alt_m_values is None:
            return math.nan
        return float(np.max(np.abs(self.m_values - self.alt_m_values) / np.abs(self.alt_m_values)))

    @property
    def a_range(self) -> Tuple[float, float]:
        if self.segments:
            return min(1.0, float(self.a_samples[0])), self.segments[-1].right
        return float(self.a_samples[0]), float(self.a_samples[-1])

    def _pchip(self):
        la = np.log(self.a_samples)
        return PchipInterpolator(la, np.log(self.m_values))

    def mu_at(self, a) -> np.ndarray:
        """mu at arbitrary a inside the covered range."""
        arr = np.atleast_1d(np.asarray(a, dtype=float))
        out = np.zeros_like(arr)
        if self.segments:
            for seg in self.segments:
                sel = (arr > seg.left) & (arr <= seg.right)
                out[sel] = seg.mu(arr[sel])
        else:
            sel = arr > 1.0
            out[sel] = self._pchip().derivative()(np.log(arr[sel]))
        return out if np.ndim(a) else float(out[0])

    def log_m_at(self, a) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(a, dtype=float))
        out = np.zeros_like(arr)
        if self.segments:
            for seg in self.segments:
                sel = (arr > seg.left) & (arr <= seg.right)
                out[sel] = seg.log_m(arr[sel])
        else:
            sel = arr > 1.0
            out[sel] = self._pchip()(np.log(arr[sel]))
        return out if np.ndim(a) else float(out[0])

    def m_at(self, a):
        return np.exp(self.log_m_at(a))

    def resampled(self, a_samples: Sequence[float]) -> "MCurve":
        """The same fitted curve reported on new samples (no new mu evaluations)."""
        a = np.asarray(a_samples, dtype=float)
        lo, hi = self.a_range
        if a.size and (a.max() > hi + 1e-12 or (a.max() > 1 and not self.segments and a.min() < lo)):
            raise ValueError("samples outside the fitted range")
        return MCurve(self.omega, a, np.asarray(self.mu_at(a), dtype=float),
                      np.asarray(self.m_at(a), dtype=float), self.source, None, self.segments)

    def covers(self, lo: float, hi: float) -> bool:
        a0, a1 = self.a_range
        return hi <= 1.0 or (a0 <= max(lo, 1.0) + 1e-12 and hi <= a1 + 1e-12)


def _fit_segment(ctx: KernelContext, l: float, r: float, points: int, n_per_panel: int,
                 tol: float, min_width: float, logm: float, refinement: int = 0) -> List[_Segment]:
    """Adaptive piecewise Chebyshev fit of mu on one sqrt(n) segment [l, r].

    A piece is bisected while its two trailing coefficients exceed
    ``tol * max(1, max |mu|)``, unless bisection stopped paying off (the
    tail did not halve relative to the parent piece), which marks the noise
    floor of the mu evaluations.
    """
    ref = lobatto_s(points)
    x = 2.0 * ref - 1.0
    L = r - l
    cache = {}

    def mu_at_s(sv):
        key = round(float(sv), 15)
        if key not in cache:
            cache[key] = opmod.mu_of_a(ctx, l + L * key * key, n_per_panel, refinement)
        return cache[key]

    stack = [(0.0, 1.0, math.inf)]
    pieces = []
    while stack:
        s0, s1, parent_tail = stack.pop()
        sv = s0 + (s1 - s0) * ref
        mu = np.array([mu_at_s(v) for v in sv])
        coef = cheb.chebfit(x, mu, points - 1)
        scale = max(1.0, float(np.max(np.abs(mu))))
        tail = abs(coef[-1]) + abs(coef[-2])
        if tail > tol * scale and s1 - s0 > min_width and tail < 0.5 * parent_tail:
            mid = 0.5 * (s0 + s1)
            stack.append((mid, s1, tail))
            stack.append((s0, mid, tail))
            continue
        pieces.append((s0, s1, sv, mu, coef))
    out = []
    for s0, s1, sv, mu, coef in sorted(pieces, key=lambda t: t[0]):
        a_nodes = l + L * sv ** 2
        # d log m / dx = mu(a)/a * da/ds * ds/dx with da/ds = 2 L s, ds/dx = (s1 - s0)/2
        integrand = mu / a_nodes * 2.0 * L * sv * 0.5 * (s1 - s0)
        anti = cheb.chebint(cheb.chebfit(x, integrand, points - 1), lbnd=-1.0)
        out.append(_Segment(l, L, s0, s1, coef, anti, logm))
        logm += float(cheb.chebval(1.0, anti))
    return out


def _mu_segments(ctx: KernelContext, a_max: float, points: int, n_per_panel: int,
                 tol: float = 1e-6, min_width: float = 1.0 / 64,
                 refinement: int = 0) -> Tuple[_Segment, ...]:
    """Fits of mu over [1, a_max], one adaptive set per sqrt(n) segment."""
    segs: List[_Segment] = []
    br = segment_breaks(a_max)
    for l, r in zip(br[:-1], br[1:]):
        start = segs[-1].log_m(segs[-1].right) if segs else 0.0
        segs.extend(_fit_segment(ctx, l, r, points, n_per_panel, tol, min_width, start, refinement))
    return tuple(segs)


def check_a_max(a_max: float, allow_large_a: bool = False) -> None:
    if a_max > A_MAX_DEFAULT and not allow_large_a:
        raise RegimeError(f"a_max = {a_max} exceeds {A_MAX_DEFAULT}; pass allow_large_a to override")


def m_curve(ctx: KernelContext, a_grid: Sequence[float], points: int = SEGMENT_POINTS,
            n_per_panel: int = opmod.DEFAULT_NODES, with_determinants: bool = True,
            allow_large_a: bool = False, refinement: int = 1) -> MCurve:
    """m(a) and mu(a) on ``a_grid`` from both sources.

    The primary source is ``exp(integral_1^a mu(b) db/b)`` with ``mu``
    resolved per sqrt(n) segment; the determinant ratio
    ``det(I+H)/det(I-H)`` is stored as ``alt_m_values``.

    Raises
    ------
    RegimeError
        If ``omega <= 1`` or ``max(a_grid) > 4`` without ``allow_large_a``.
    SolveError, SingularError
        Propagated from the operator stage.
    """
    if ctx.omega <= 1:
        raise RegimeError("m-curve needs omega > 1")
    a = np.asarray(a_grid, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0) or a[0] <= 0:
        raise ValueError("a_grid must be positive and increasing")
    check_a_max(float(a[-1]), allow_large_a)
    segs = _mu_segments(ctx, float(a[-1]), points, n_per_panel, refinement=refinement) if a[-1] > 1 else ()
    base = MCurve(ctx.omega, a, np.zeros_like(a), np.ones_like(a), "exp_integral", None, segs)
    mu = np.asarray(base.mu_at(a), dtype=float)
    m = np.asarray(base.m_at(a), dtype=float)
    alt = None
    if with_determinants:
        alt = np.ones_like(a)
        for i, ai in enumerate(a):
            if ai > 1:
                lp, lm = opmod.log_det_pair(opmod.operator_at(ctx, float(ai), n_per_panel, refinement))
                alt[i] = math.exp(lp - lm)
    return MCurve(ctx.omega, a, mu, m, "exp_integral", alt, segs)


# ---------------------------------------------------------------------------
# states and initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalState:
    """(A_a(z), B_a(z)) at one point of the evolution."""

    z: ComplexValue
    a: float
    A: ComplexValue
    B: ComplexValue
    m: float = 1.0
    tail_bound: float = 0.0

    @property
    def gauge(self) -> Tuple[complex, complex]:
        """(A / m, m B)."""
        return complex(self.A) / self.m, complex(self.B) * self.m

    @property
    def E(self) -> complex:
        return complex(self.A) - 1j * complex(self.B)


def ab_initial(z, omega: float) -> CanonicalState:
    """(A^omega(z), B^omega(z)) as the state at a = 1."""
    z = complex(z)
    A, B = ab_omega(z, omega)
    return CanonicalState(ComplexValue.of(z), 1.0, ComplexValue.of(A), ComplexValue.of(B))


def ab_closed_form(z, omega: float, a: float) -> CanonicalState:
    """(A_a, B_a) for ``0 < a <= 1``, where mu = 0 and m = 1.

    ``A_a = (xi_+ a^{iz} + xi_- a^{-iz}) / 2`` and
    ``B_a = i (xi_+ a^{iz} - xi_- a^{-iz}) / 2`` with
    ``xi_+ = xi(1/2 + omega - iz)`` and ``xi_- = xi(1/2 - omega - iz)``.
    """
    if not 0 < a <= 1:
        raise ValueError("closed form holds for 0 < a <= 1")
    z = complex(z)
    xp = complex(xi(0.5 + omega - 1j * z))
    xm = complex(xi(0.5 - omega - 1j * z))
    ep = a ** (1j * z)
    em = a ** (-1j * z)
    A = 0.5 * (xp * ep + xm * em)
    B = 0.5j * (xp * ep - xm * em)
    return CanonicalState(ComplexValue.of(z), float(a), ComplexValue.of(A), ComplexValue.of(B))


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepControl:
    """Adaptive RK4 with step doubling.

    Steps are taken in the segment parameter ``s`` (``a = l + L s**2``);
    ``tol`` bounds the local error estimate per unit of ``s`` relative to
    ``max |state|``.
    """

    tol: float = 1e-8
    initial_step: float = 0.05
    min_step: float = 1e-10
    max_steps: int = 200000


def _rk4(f, s, y, h):
    k1 = f(s, y)
    k2 = f(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(s + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate_segment(y, z, mcurve, l, r, a0, a1, ctl: StepControl):
    """Evolve gauge variables from a0 to a1 inside [l, r] using a = l + (r-l) s^2."""
    L = r - l
    s0 = math.sqrt(max(0.0, (a0 - l) / L))
    s1 = math.sqrt(max(0.0, (a1 - l) / L))
    if s0 == s1:
        return y

    def f(s, yy):
        a = l + L * s * s
        mu = mcurve.mu_at(a)
        dads = 2.0 * L * s
        u, v = yy
        return (dads / a) * np.array([-mu * u + z * v, mu * v - z * u])

    direction = 1.0 if s1 > s0 else -1.0
    h = direction * min(ctl.initial_step, abs(s1 - s0))
    s = s0
    steps = 0
    while (s1 - s) * direction > 1e-15:
        if abs(h) > abs(s1 - s):
            h = s1 - s
        full = _rk4(f, s, y, h)
        half = _rk4(f, s + 0.5 * h, _rk4(f, s, y, 0.5 * h), 0.5 * h)
        err = np.max(np.abs(half - full)) / 15.0
        # relative control per unit s: the gauge variables shrink like 1/m or grow like m
        allowed = ctl.tol * abs(h) * max(float(np.max(np.abs(half))), 1e-300)
        if err <= allowed:
            y = half + (half - full) / 15.0
            s += h
            steps += 1
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (allowed / err) ** 0.2)
            h *= max(grow, 1.0)
        else:
            h *= max(0.1, 0.9 * (allowed / err) ** 0.2)
        if abs(h) < ctl.min_step or steps > ctl.max_steps:
            raise StepError(f"step control failed near a = {l + L * s * s:.6g}")
    return y


def _rotate(u, v, z, t):
    """Exact flow for mu = 0 over log-length t."""
    c, s = np.cos(z * t), np.sin(z * t)
    return u * c + v * s, -u * s + v * c


def evolve(state: CanonicalState, a_target: float, mcurve: Optional[MCurve] = None,
           step_control: StepControl = StepControl()) -> CanonicalState:
    """Evolve (A, B) from ``state.a`` to ``a_target``.

    On ``a <= 1`` the system has mu = 0 and is integrated exactly; on
    ``a > 1`` adaptive RK4 runs in the gauge variables with mandatory
    step boundaries at every sqrt(n).

    Raises
    ------
    ValueError
        If the m-curve does not cover the requested range.
    StepError
        If the step control cannot meet its tolerance.
    """
    z = complex(state.z)
    a0, a1 = float(state.a), float(a_target)
    lo, hi = min(a0, a1), max(a0, a1)
    if hi > 1 and (mcurve is None or not mcurve.covers(lo, hi)):
        raise ValueError("m-curve does not cover the evolution range")
    m0 = float(mcurve.m_at(a0)) if (mcurve is not None and a0 > 1) else 1.0
    u, v = complex(state.A) / m0, complex(state.B) * m0
    y = np.array([u, v], dtype=complex)
    if a0 != a1:
        # waypoints: 1 and every sqrt(n) strictly between
        pts = sorted({a0, a1} | ({1.0} if lo < 1 < hi else set())
                     | {math.sqrt(n) for n in range(2, int(hi * hi) + 2) if lo < math.sqrt(n) < hi})
        if a1 < a0:
            pts = pts[::-1]
        for p, q in zip(pts[:-1], pts[1:]):
            mid = 0.5 * (p + q)
            if mid <= 1.0:
                y = np.array(_rotate(y[0], y[1], z, math.log(q / p)))
            else:
                n = int(math.floor(mid * mid))
                l = max(1.0, math.sqrt(n))
                r = math.sqrt(n + 1)
                y = _integrate_segment(y, z, mcurve, l, r, p, q, step_control)
    m1 = float(mcurve.m_at(a1)) if (mcurve is not None and a1 > 1) else 1.0
    return CanonicalState(state.z, a1, ComplexValue.of(y[0] * m1), ComplexValue.of(y[1] / m1), m1)


def evolve_path(state: CanonicalState, a_samples: Sequence[float], mcurve: Optional[MCurve] = None,
                step_control: StepControl = StepControl()) -> List[CanonicalState]:
    """States at each of ``a_samples`` (in order), evolving sequentially."""
    out = []
    cur = state
    for a in a_samples:
        cur = evolve(cur, float(a), mcurve, step_control)
        out.append(cur)
    return out


# ---------------------------------------------------------------------------
# direct formulas
# ---------------------------------------------------------------------------

def _tail_integrals(ctx: KernelContext, grid, a: float, z: complex, X: float, sols, nodes: int):
    """integral_a^X phi^eps(x) x^{iz - 1/2} dx for eps = +1, -1."""
    y, w = grid.nodes, grid.weights
    T = np.concatenate([[a * X, a * a], X * y, a * y])
    H = mellin_antiderivative(ctx, z, T, nodes)
    main = a ** (-0.5 - 1j * z) * (H[0] - H[1])
    N = y.size
    F = y ** (-0.5 - 1j * z) * (H[2:2 + N] - H[2 + N:])
    out = {}
    for eps, sol in sols.items():
        out[eps] = main - eps * np.sum(w * sol.grid_values * F)
    return out


def _tail_bound(ctx: KernelContext, grid, a: float, z: complex, X: float, sols) -> float:
    """Bound on the discarded part over (X, inf) from a fitted envelope of h."""
    v = z.imag
    t = np.linspace(a * X / 4, a * X, 4001)
    hv = np.abs(h_omega(t, ctx))
    upper = hv[t >= a * X / 2].max()
    lower = hv[t < a * X / 2].max()
    kappa = max(0.0, math.log2(max(upper, 1e-300) / max(lower, 1e-300)))
    C = upper / (a * X) ** kappa
    y, w = grid.nodes, grid.weights
    worst = 0.0
    for sol in sols.values():
        worst = max(worst, a ** kappa + float(np.sum(w * np.abs(sol.grid_values) * y ** kappa)))
    rate = v - 0.5 - kappa
    if rate <= 0:
        return math.inf
    return 0.5 * math.sqrt(a) * C * worst * X ** (-rate) / rate


def direct_ab(ctx: KernelContext, a: float, z, X: Optional[float] = None, tol: float = 1e-4,
              m: Optional[float] = None, nodes: int = 20) -> CanonicalState:
    """(A_a, B_a) from the integral representation instead of the ODE.

    For ``a > 1``::

        At(z)    = a^{iz}/2 + (sqrt(a)/2) integral_a^inf phi^+(x) x^{iz-1/2} dx
        -i Bt(z) = a^{iz}/2 - (sqrt(a)/2) integral_a^inf phi^-(x) x^{iz-1/2} dx
        A = m xi(1/2+omega-iz) At,  B = xi(1/2+omega-iz) Bt / m

    The integrals are truncated at ``X``; exchanging the order of
    integration turns them into differences of the Mellin antiderivative of
    ``h``.  For ``a <= 1`` the closed form is returned.

    The recorded ``tail_bound`` is the bound on the discarded part of
    ``(sqrt(a)/2) integral`` relative to the leading term ``|a^{iz}|/2``.
    When ``X`` is not given it is doubled from 32 while ``a X`` stays within
    ``ctx.n_max``; the cost grows quadratically in ``a X``.

    Parameters
    ----------
    tol : float
        Largest accepted relative tail bound.
    m : float, optional
        Value of m(a) to use; defaults to the determinant ratio.

    Raises
    ------
    ConvergenceError
        If ``Im z <= omega + 1/2`` or the tail bound stays above ``tol``.
    """
    z = complex(z)
    if a <= 1:
        return ab_closed_form(z, ctx.omega, a)
    if z.imag <= ctx.omega + 0.5:
        raise ConvergenceError(f"Im z = {z.imag} must exceed omega + 1/2 = {ctx.omega + 0.5}")
    op = opmod.operator_at(ctx, a)
    sols = {eps: opmod.solve_phi(op, eps) for eps in (1, -1)}
    if m is None:
        lp, lm = opmod.log_det_pair(op)
        m = math.exp(lp - lm)
    if X is not None:
        candidates = [float(X)]
    else:
        candidates = [32.0 * 2 ** k for k in range(12) if 32.0 * 2 ** k * a <= ctx.n_max]
    lead = 0.5 * abs(a ** (1j * z))
    for Xi in candidates:
        bound = 0.5 * math.sqrt(a) * _tail_bound(ctx, op.grid, a, z, Xi, sols) / lead
        if bound < tol or Xi == candidates[-1]:
            break
    if bound >= tol:
        raise ConvergenceError(f"tail bound {bound:.3g} exceeds tol {tol:.3g} at X={Xi:g}")
    I = _tail_integrals(ctx, op.grid, a, z, Xi, sols, nodes)
    half = 0.5 * a ** (1j * z)
    At = half + 0.5 * math.sqrt(a) * I[1]
    Bt = 1j * (half - 0.5 * math.sqrt(a) * I[-1])
    xp = complex(xi(0.5 + ctx.omega - 1j * z))
    return CanonicalState(ComplexValue.of(z), float(a), ComplexValue.of(m * xp * At),
                          ComplexValue.of(xp * Bt / m), float(m), float(bound))


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potentials:
    """V^+ and V^- on interior samples of an m-curve."""

    a: np.ndarray
    mu: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray


def potentials(mcurve: MCurve) -> Potentials:
    """V^{+-} = mu^2 -+ a mu' from centered differences of log m in log a.

    Endpoints are dropped; non-uniform spacing uses the second-order
    three-point formulas.
    """
    a = np.asarray(mcurve.a_samples, dtype=float)
    if a.size < 3:
        raise ValueError("need at least three samples")
    t = np.log(a)
    L = np.log(mcurve.m_values)
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    second = 2.0 * (h0 * L[2:] - (h0 + h1) * L[1:-1] + h1 * L[:-2]) / (h0 * h1 * (h0 + h1))
    first = (h0 ** 2 * L[2:] + (h1 ** 2 - h0 ** 2) * L[1:-1] - h1 ** 2 * L[:-2]) / (h0 * h1 * (h0 + h1))
    vp = first ** 2 - second
    vm = first ** 2 + second
    return Potentials(a[1:-1], first, vp, vm)


def schrodinger_residual(state_m: CanonicalState, state_0: CanonicalState, state_p: CanonicalState,
                         v_plus: float) -> float:
    """Relative residual of (-a d/da a d/da + V^+) psi = z^2 psi at the middle state.

    ``psi = A / m``; the three states must be equally spaced in log a.
    """
    z = complex(state_0.z)
    dt = math.log(state_p.a / state_0.a)
    if not math.isclose(math.log(state_0.a / state_m.a), dt, rel_tol=1e-9):
        raise ValueError("states must be equally spaced in log a")
    psi = [complex(s.A) / s.m for s in (state_m, state_0, state_p)]
    lap = (psi[2] - 2 * psi[1] + psi[0]) / dt ** 2
    res = -lap + v_plus * psi[1] - z * z * psi[1]
    return abs(res) / max(abs(z * z * psi[1]), abs(lap), 1e-300)


# ---------------------------------------------------------------------------
# zeros
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroReport:
    """Real zeros of A^omega on [0, T] and the contour cross-check."""

    zeros: np.ndarray
    contour_count: int
    b_zeros: np.ndarray
    interlaced: bool
    min_contour_modulus: float


def _bracket_roots(f, lo: float, hi: float, step: float) -> np.ndarray:
    x = np.arange(lo, hi + step / 2, step)
    x[-1] = min(x[-1], hi)
    v = f(x)
    roots = []
    for i in range(x.size - 1):
        if v[i] == 0.0:
            roots.append(x[i])
        elif v[i] * v[i + 1] < 0:
            roots.append(brentq(lambda t: float(f(np.array([t]))[0]), x[i], x[i + 1], xtol=1e-14, rtol=1e-15))
    if v[-1] == 0.0:
        roots.append(x[-1])
    return np.array(roots)


def contour_count(f, x0: float, x1: float, y0: float, y1: float, rel_floor: float = 1e-10,
                  max_turn: float = 0.3) -> Tuple[int, float]:
    """Number of zeros of ``f`` inside the rectangle via the argument principle.

    The phase is tracked along the boundary with adaptive bisection so that
    consecutive samples differ by at most ``max_turn`` radians.

    Raises
    ------
    ContourError
        If ``|f|`` on the boundary falls below ``rel_floor`` times its
        maximum there.
    """
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    total = 0.0
    mods = []
    for p, q in zip(corners[:-1], corners[1:]):
        ts = np.linspace(0.0, 1.0, 65)
        vals = f(p + (q - p) * ts)
        mods.append(np.abs(vals))
        stack = [(ts[i], ts[i + 1], vals[i], vals[i + 1]) for i in range(ts.size - 1)]
        while stack:
            ta, tb, fa, fb = stack.pop()
            if fa == 0 or fb == 0:
                raise ContourError("contour passes through a zero")
            d = np.angle(fb / fa)
            if abs(d) <= max_turn or tb - ta < 1e-12:
                if abs(d) > max_turn:
                    raise ContourError("phase could not be resolved along the contour")
                total += d
                continue
            tm = 0.5 * (ta + tb)
            fm = complex(f(np.array([p + (q - p) * tm]))[0])
            mods.append(np.array([abs(fm)]))
            stack.append((tm, tb, fm, fb))
            stack.append((ta, tm, fa, fm))
    allmod = np.concatenate(mods)
    floor = float(allmod.min() / allmod.max())
    if floor < rel_floor:
        raise ContourError(f"contour passes within {floor:.3g} (relative) of a zero")
    return int(round(total / (2 * math.pi))), floor


def zeros_of_A(omega: float, t_max: float, step: float = 0.02, height: float = 1.0) -> ZeroReport:
    """Real zeros of A^omega in [0, t_max], counted independently by contour.

    Zeros are bracketed by sign changes on a grid of spacing ``step`` and
    refined by Brent's method; the contour count uses the rectangle
    ``[0, t_max] x [-height, height]``.

    Raises
    ------
    ValueError
        If ``omega < 1/2``.
    ContourError
        If the contour passes too close to a zero.
    """
    if omega < 0.5:
        raise ValueError("zeros are guaranteed real only for omega >= 1/2")

    def A(x):
        return np.real(ab_omega(np.asarray(x, dtype=float), omega)[0])

    def B(x):
        return np.real(ab_omega(np.asarray(x, dtype=float), omega)[1])

    def Ac(zs):
        return np.asarray(ab_omega(np.asarray(zs, dtype=complex), omega)[0])

    za = _bracket_roots(A, 0.0, t_max, step)
    # B is odd, so 0 is a zero; bracket the rest away from it
    zb = np.concatenate([[0.0], _bracket_roots(B, 0.5 * step, t_max, step)])
    count, floor = contour_count(Ac, 0.0, t_max, -height, height)
    return ZeroReport(za, count, zb, interlace(za, zb), floor)


def interlace(first: np.ndarray, second: np.ndarray) -> bool:
    """True if the merged sorted sequence alternates between the two sets."""
    tags = sorted([(x, 0) for x in first] + [(x, 1) for x in second])
    return all(tags[i][1] != tags[i + 1][1] for i in range(len(tags) - 1))
