"""Arithmetic kernels built from the Jordan-type coefficients c_omega(n).

The central objects are::

    c(n)  = n**omega * prod_{p | n} (1 - p**(-2 omega))
    g(x)  = 2 pi**omega / Gamma(omega) * (x**(2-omega) (1-x**2)**(omega-1)
            - omega x**(omega-1) beta(x**2; 3/2 - omega, omega))       (0 < x < 1)
    h(x)  = (1/x) sum_{n <= x} c(n) g(n/x)
    g1(x) = integral_x^1 sqrt(y/x) g(y) dy / y
    h1(x) = (1/x) sum_{n <= x} c(n) g1(n/x)

where ``beta(z; p, q) = integral_z^1 t**(p-1) (1-t)**(q-1) dt`` is the upper
incomplete beta integral, allowed here with ``p <= 0``.

For speed, ``g`` and ``g1`` are evaluated through their smooth cofactors
``G = g / (1-x^2)**(omega-1)`` and ``G1 = g1 / (1-x^2)**omega``, tabulated by
piecewise Chebyshev interpolation on dyadic panels accumulating at ``x = 0``
and checked against direct evaluation when the context is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.special import gamma as gamma_fn

from . import quadrature as qd
from .errors import ConvergenceError, DomainError, RangeError
from .specfun import theta_omega


# ---------------------------------------------------------------------------
# incomplete beta integral with a possibly nonpositive first parameter
# ---------------------------------------------------------------------------

def beta_tail(z, p: float, q: float, panels: int = 1, nodes: int = 32):
    """Upper incomplete beta integral ``integral_z^1 t**(p-1) (1-t)**(q-1) dt``.

    Parameters
    ----------
    z : float or ndarray
        Lower limit(s) in (0, 1].
    p : float
        First parameter; any real value (the integrand is bounded near t = z).
    q : float
        Second parameter, ``q > 0``.
    panels : int
        Gauss--Legendre panels per unit length of ``log(1/z)`` on the
        part of the interval below 1/2.
    nodes : int
        Nodes per Gauss rule.

    Notes
    -----
    On ``[max(z, 1/2), 1]`` a Gauss--Jacobi rule absorbs ``(1-t)**(q-1)``.
    Below 1/2 the substitution ``t = exp(v)`` makes the integrand smooth
    and panels of unit width in ``v`` keep the rule exact to rounding.
    """
    if q <= 0:
        raise DomainError("beta_tail needs q > 0")
    zz = np.asarray(z, dtype=float)
    scalar = zz.ndim == 0
    zz = np.atleast_1d(zz)
    if np.any((zz <= 0) | (zz > 1)):
        raise DomainError("beta_tail needs 0 < z <= 1")
    sj, wj = qd.gauss_jacobi_right(nodes, q - 1.0)

    def jacobi_part(z0):
        t = z0[:, None] + (1.0 - z0[:, None]) * (sj + 1.0) * 0.5
        return ((1.0 - z0) * 0.5) ** q * np.sum(wj * t ** (p - 1.0), axis=1)

    out = np.empty_like(zz)
    hi = zz >= 0.5
    if np.any(hi):
        out[hi] = jacobi_part(zz[hi])
    lo = ~hi
    if np.any(lo):
        zl = zz[lo]
        vl = np.log(zl)
        length = math.log(0.5) - vl
        K = max(1, int(math.ceil(length.max() * panels)))
        x, w = qd.gauss_legendre(nodes)
        acc = jacobi_part(np.full(zl.shape, 0.5))
        step = length / K
        for k in range(K):
            v = (vl + k * step)[:, None] + (x + 1.0) * 0.5 * step[:, None]
            t = np.exp(v)
            acc += 0.5 * step * np.sum(w * t ** p * (1.0 - t) ** (q - 1.0), axis=1)
        out[lo] = acc
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BetaIntegralSpec:
    """A request for ``beta(z; p, q)``; see :func:`beta_tail`."""

    z: float
    p: float
    q: float
    panels: int = 1

    def __post_init__(self):
        if not 0 < self.z < 1:
            raise DomainError("z must lie in (0, 1)")
        if self.q <= 0 or self.panels < 1:
            raise DomainError("q > 0 and panels >= 1 required")

    def evaluate(self) -> float:
        return beta_tail(self.z, self.p, self.q, self.panels)


# ---------------------------------------------------------------------------
# exact cofactors (slow path, also used to build the tables)
# ---------------------------------------------------------------------------

def _g_cofactor_exact(u, omega: float) -> np.ndarray:
    """G(u) = g(u) / (1-u^2)**(omega-1) for 0 < u <= 1."""
    u = np.asarray(u, dtype=float)
    z = u * u
    b = beta_tail(np.minimum(z, 1.0), 1.5 - omega, omega)
    below = z < 1.0
    ratio = np.zeros_like(u)
    ratio[below] = b[below] / (1.0 - z[below]) ** (omega - 1.0)
    pref = 2.0 * math.pi ** omega / gamma_fn(omega)
    return pref * (u ** (2.0 - omega) - omega * u ** (omega - 1.0) * ratio)


def _g1_closed_form(u, omega: float) -> np.ndarray:
    """g1(u) for 0 < u < 1 from its closed form in incomplete beta integrals."""
    u = np.asarray(u, dtype=float)
    if abs(omega - 0.5) < 1e-12:
        r = np.sqrt(1.0 - u * u)
        return 2.0 / np.sqrt(u) * (2.0 * r + np.log(u) - np.log1p(r))
    z = u * u
    b1 = beta_tail(z, (3.0 - 2.0 * omega) / 2.0, omega)
    b2 = beta_tail(z, (5.0 - 2.0 * omega) / 4.0, omega)
    pref = 4.0 * omega / (2.0 * omega - 1.0) * math.pi ** omega / gamma_fn(omega)
    return pref * (u ** (omega - 1.0) * b1 - (2.0 * omega + 1.0) / (4.0 * omega) * u ** -0.5 * b2)


def _g1_cofactor_exact(u, omega: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    one = u >= 1.0
    # limit at u -> 1: pi**omega / (omega Gamma(omega))
    out[one] = math.pi ** omega / (omega * gamma_fn(omega))
    rest = ~one
    out[rest] = _g1_closed_form(u[rest], omega) / (1.0 - u[rest] ** 2) ** omega
    return out


class _DyadicChebyshev:
    """Piecewise Chebyshev interpolant of a function on (0, 1].

    Panel ``k`` covers ``[2**-(k+1), 2**-k]``; points below the last panel
    fall back to the exact function.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], levels: int = 40, degree: int = 30):
        self.func = func
        self.levels = levels
        self.degree = degree
        coeffs = np.empty((levels, degree + 1))
        for k in range(levels):
            lo = 2.0 ** -(k + 1)
            coeffs[k] = cheb.chebinterpolate(lambda t, lo=lo: func(lo * (t + 3.0) * 0.5), degree)
        self.coeffs = coeffs

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        k = np.floor(-np.log2(u)).astype(np.int64)
        k = np.maximum(k, 0)
        inside = k < self.levels
        if np.any(inside):
            ki = k[inside]
            t = np.clip(2.0 * u[inside] * np.exp2(ki + 1) - 3.0, -1.0, 1.0)
            c = self.coeffs
            b1 = np.zeros_like(t)
            b2 = np.zeros_like(t)
            two_t = 2.0 * t
            for j in range(self.degree, 0, -1):
                b1, b2 = c[ki, j] + two_t * b1 - b2, b1
            out[inside] = c[ki, 0] + t * b1 - b2
        if not np.all(inside):
            out[~inside] = self.func(u[~inside])
        return out


def _jordan_table(n_max: int, omega: float) -> np.ndarray:
    """c(n) for 0 <= n <= n_max by a prime sieve (entry 0 is unused)."""
    prod = np.ones(n_max + 1)
    is_prime = np.ones(n_max + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, n_max + 1):
        if is_prime[p]:
            is_prime[2 * p::p] = False
            prod[p::p] *= 1.0 - float(p) ** (-2.0 * omega)
    c = np.arange(n_max + 1, dtype=float) ** omega * prod
    c[0] = 0.0
    return c


@dataclass(frozen=True)
class KernelContext:
    """Everything needed to evaluate the kernels for one value of omega.

    Parameters
    ----------
    omega : float
        Shift parameter, ``omega > 0``.
    n_max : int
        Largest ``n`` for which ``c(n)`` is tabulated; ``h(x)`` needs
        ``floor(x) <= n_max``.
    quad_tol : float
        Target accuracy for the quadratures performed on behalf of callers.
    """

    omega: float
    n_max: int = 4096
    quad_tol: float = 1e-10
    c_table: np.ndarray = field(init=False, repr=False, compare=False)
    table_error: float = field(init=False, compare=False)
    _G: _DyadicChebyshev = field(init=False, repr=False, compare=False)
    _G1: _DyadicChebyshev = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("omega must be positive")
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")
        om = float(self.omega)
        object.__setattr__(self, "c_table", _jordan_table(self.n_max, om))
        G = _DyadicChebyshev(lambda u: _g_cofactor_exact(u, om))
        G1 = _DyadicChebyshev(lambda u: _g1_cofactor_exact(u, om))
        object.__setattr__(self, "_G", G)
        object.__setattr__(self, "_G1", G1)
        # validate the tables at points that are not interpolation nodes
        probe = np.concatenate([np.linspace(0.013, 0.999, 97), 2.0 ** -np.linspace(0.5, 30.5, 31)])
        errs = []
        for table, exact in ((G, G.func), (G1, G1.func)):
            ref = exact(probe)
            errs.append(np.max(np.abs(table(probe) - ref) / np.maximum(np.abs(ref), 1.0)))
        object.__setattr__(self, "table_error", float(max(errs)))

    # --- cofactors -----------------------------------------------------
    def G(self, u) -> np.ndarray:
        """Smooth cofactor g(u) / (1-u^2)**(omega-1) on (0, 1]."""
        return self._G(u)

    def G1(self, u) -> np.ndarray:
        """Smooth cofactor g1(u) / (1-u^2)**omega on (0, 1]."""
        return self._G1(u)

    def c(self, n: int) -> float:
        return jordan_c(n, self)

    def check_range(self, x_max: float) -> None:
        if math.floor(x_max) > self.n_max:
            raise RangeError(f"argument {x_max} needs c(n) beyond n_max={self.n_max}")

    def term(self, n: int, t: np.ndarray) -> np.ndarray:
        """c(n)/t * g(n/t) for t > n (zero for t <= n)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = t > n
        if np.any(m):
            u = n / t[m]
            out[m] = self.c_table[n] / t[m] * (1.0 - u * u) ** (self.omega - 1.0) * self.G(u)
        return out

    def term1(self, n: int, t: np.ndarray) -> np.ndarray:
        """c(n)/t * g1(n/t) for t > n (zero for t <= n)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = t > n
        if np.any(m):
            u = n / t[m]
            out[m] = self.c_table[n] / t[m] * (1.0 - u * u) ** self.omega * self.G1(u)
        return out


def jordan_c(n: int, ctx: KernelContext) -> float:
    """c(n) = n**omega * prod_{p | n} (1 - p**(-2 omega)).

    Raises
    ------
    RangeError
        If ``n`` lies outside ``1..n_max``.
    """
    if n < 1 or n > ctx.n_max:
        raise RangeError(f"n={n} outside 1..{ctx.n_max}")
    return float(ctx.c_table[n])


def _positive_array(x):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~(arr > 0)):
        raise DomainError("argument must be positive")
    return arr, scalar


def g_omega(x, ctx: KernelContext):
    """g(x); zero for ``x > 1``.

    Raises
    ------
    DomainError
        At ``x = 1`` when ``omega <= 1``, where g is unbounded or undefined.
    """
    arr, scalar = _positive_array(x)
    if ctx.omega <= 1 and np.any(arr == 1.0):
        raise DomainError("g is undefined at x = 1 for omega <= 1")
    out = np.zeros_like(arr)
    m = arr < 1.0
    if np.any(m):
        u = arr[m]
        out[m] = (1.0 - u * u) ** (ctx.omega - 1.0) * ctx.G(u)
    return float(out[0]) if scalar else out


def g_omega_exact(x, omega: float):
    """g(x) straight from its defining formula; slow reference path."""
    arr, scalar = _positive_array(x)
    out = np.zeros_like(arr)
    m = arr < 1.0
    if np.any(m):
        u = arr[m]
        pref = 2.0 * math.pi ** omega / gamma_fn(omega)
        out[m] = pref * (u ** (2 - omega) * (1 - u * u) ** (omega - 1)
                         - omega * u ** (omega - 1) * beta_tail(u * u, 1.5 - omega, omega))
    return float(out[0]) if scalar else out


def g1_omega(x, ctx: KernelContext):
    """g1(x) from the closed form; zero for ``x >= 1``."""
    arr, scalar = _positive_array(x)
    out = np.zeros_like(arr)
    m = arr < 1.0
    if np.any(m):
        u = arr[m]
        out[m] = (1.0 - u * u) ** ctx.omega * ctx.G1(u)
    return float(out[0]) if scalar else out


def g1_omega_quadrature(x: float, ctx: KernelContext, nodes: int = 40) -> float:
    """g1(x) by direct quadrature of ``integral_x^1 sqrt(y/x) g(y) dy / y``."""
    if not x > 0:
        raise DomainError("x must be positive")
    if x >= 1:
        return 0.0
    om = ctx.omega
    total = 0.0
    mid = max(x, 0.5)
    # [mid, 1]: Gauss--Jacobi absorbs (1-y)**(omega-1)
    s, w = qd.gauss_jacobi_right(nodes, om - 1.0)
    half = 0.5 * (1.0 - mid)
    y = mid + half * (s + 1.0)
    smooth = (1.0 + y) ** (om - 1.0) * g_omega_exact(y, om) / ((1.0 - y * y) ** (om - 1.0))
    total += half ** om * np.sum(w * np.sqrt(y / x) * smooth / y)
    if x < mid:
        # [x, 1/2] in the log variable, unit-width panels
        length = math.log(mid / x)
        K = max(1, int(math.ceil(length)))
        gs, gw = qd.gauss_legendre(nodes)
        step = length / K
        for k in range(K):
            v = math.log(x) + step * (k + 0.5 * (gs + 1.0))
            yy = np.exp(v)
            total += 0.5 * step * np.sum(gw * np.sqrt(yy / x) * g_omega_exact(yy, om))
    return float(total)


def _check_h_args(arr: np.ndarray, ctx: KernelContext) -> None:
    ctx.check_range(float(arr.max()))
    if ctx.omega <= 1:
        ints = (arr >= 1) & (arr == np.floor(arr))
        if np.any(ints):
            raise DomainError("h is singular at integers for omega <= 1")


def h_omega(x, ctx: KernelContext):
    """h(x) = (1/x) sum_{n <= x} c(n) g(n/x); zero on (0, 1).

    Raises
    ------
    RangeError
        If ``floor(x) > n_max``.
    DomainError
        At integer ``x`` when ``omega <= 1``.
    """
    arr, scalar = _positive_array(x)
    _check_h_args(arr, ctx)
    out = _h_sum(arr, ctx, ctx.term)
    return float(out[0]) if scalar else out


def h1_omega(x, ctx: KernelContext):
    """h1(x) = (1/x) sum_{n <= x} c(n) g1(n/x); zero on (0, 1)."""
    arr, scalar = _positive_array(x)
    ctx.check_range(float(arr.max()))
    out = _h_sum(arr, ctx, ctx.term1)
    return float(out[0]) if scalar else out


def _h_sum(arr: np.ndarray, ctx: KernelContext, term) -> np.ndarray:
    out = np.zeros_like(arr)
    top = int(math.floor(arr.max())) if arr.size else 0
    for n in range(1, top + 1):
        m = arr > n
        if np.any(m):
            out[m] += term(n, arr[m])
    return out


def _unit_segment_rules(n: int, right: float, alpha: float, m: int):
    """Rules on [n, right]: Gauss--Jacobi for the term singular at n, Legendre otherwise."""
    yj, wj = qd.left_singular_rule(n, right, alpha, m)
    yl, wl = qd.legendre_rule(n, right, m)
    return yj, wj, yl, wl


def h1_omega_integral(x, ctx: KernelContext, nodes: int = 24):
    """h1(x) through ``integral_1^x sqrt(y/x) h(y) dy / y``.

    Each unit interval ``[n, n+1]`` is integrated with a Gauss--Jacobi rule
    for the single term that is singular at its left end and a
    Gauss--Legendre rule for the remaining smooth terms.
    """
    arr, scalar = _positive_array(x)
    ctx.check_range(float(arr.max()))
    om = ctx.omega
    out = np.zeros_like(arr)
    for i, xv in enumerate(arr):
        if xv <= 1.0:
            continue
        total = 0.0
        n = 1
        while n < xv:
            right = min(n + 1.0, xv)
            yj, wj, yl, wl = _unit_segment_rules(n, right, om - 1.0, nodes)
            # singular term: c(n)/y ((y+n)/y^2)**(om-1) G(n/y) times (y-n)**(om-1)
            sm = ctx.c_table[n] / yj * ((yj + n) / yj ** 2) ** (om - 1.0) * ctx.G(n / yj)
            total += np.sum(wj * sm * np.sqrt(yj / xv) / yj)
            if n > 1:
                rest = np.zeros_like(yl)
                for k in range(1, n):
                    rest += ctx.term(k, yl)
                total += np.sum(wl * rest * np.sqrt(yl / xv) / yl)
            n += 1
        out[i] = total
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Mellin identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MellinResult:
    """Truncated Mellin integral with its tail diagnostics.

    Attributes
    ----------
    value : complex
        integral_1^X k(x) x**(iz - 1/2) dx for the chosen kernel k.
    X : float
        Truncation point.
    tail_bound : float
        Estimated modulus of the discarded integral over (X, inf).
    growth_constant, growth_exponent : float
        Fitted envelope ``|k(x)| <= C x**kappa`` near X used by the bound.
    """

    value: complex
    X: float
    tail_bound: float
    growth_constant: float
    growth_exponent: float


def _mellin_pieces(ctx: KernelContext, z: complex, X: int, which: str, nodes: int):
    om = ctx.omega
    alpha = om - 1.0 if which == "h" else om
    term = ctx.term if which == "h" else ctx.term1
    cof = ctx.G if which == "h" else ctx.G1
    ns = np.arange(1, X)
    sj, wj = qd.gauss_jacobi_left(nodes, alpha)
    sl, wl = qd.gauss_legendre(nodes)
    # singular terms, one per segment, shape (segments, nodes)
    yj = ns[:, None] + 0.5 * (sj + 1.0)
    cn = ctx.c_table[ns][:, None]
    smooth = cn / yj * ((yj + ns[:, None]) / yj ** 2) ** alpha * cof(ns[:, None] / yj)
    power = np.exp((1j * z - 0.5) * np.log(yj))
    val = np.sum(wj * 0.5 ** (alpha + 1.0) * smooth * power)
    # remaining terms on Legendre nodes
    yl = (ns[:, None] + 0.5 * (sl + 1.0)).ravel()
    full = _h_sum(yl, ctx, term)
    seg = np.repeat(ns, nodes)
    own = np.zeros_like(yl)
    for n in ns:
        sel = seg == n
        own[sel] = term(int(n), yl[sel])
    rest = full - own
    val += np.sum(np.tile(0.5 * wl, ns.size) * rest * np.exp((1j * z - 0.5) * np.log(yl)))
    return complex(val), yl, full


def mellin_check(z, ctx: KernelContext, X: Optional[float] = None, tol: float = 1e-6,
                 which: str = "h", nodes: int = 20, x_max: int = 4096) -> MellinResult:
    """Truncated Mellin transform ``integral_1^X k(x) x**(1/2+iz) dx/x``.

    For ``k = h`` the full integral equals ``theta_omega(z)``; for
    ``k = h1`` it equals ``(i/z) theta_omega(z)``.  Both need
    ``Im z > omega + 1/2`` for absolute convergence.

    The tail beyond ``X`` is bounded using an envelope ``C x**kappa``
    fitted to the sampled kernel on ``[X/4, X]``.  When ``X`` is not given
    it is doubled from 64 until the bound drops below ``tol``.

    Raises
    ------
    ConvergenceError
        If ``Im z`` is outside the convergence region or the tail bound
        stays above ``tol``.
    """
    z = complex(z)
    if which not in ("h", "h1"):
        raise ValueError("which must be 'h' or 'h1'")
    v = z.imag
    if v <= ctx.omega + 0.5:
        raise ConvergenceError(f"Im z = {v} must exceed omega + 1/2 = {ctx.omega + 0.5}")
    candidates = [int(math.ceil(X))] if X is not None else [64 * 2 ** k for k in range(12) if 64 * 2 ** k <= x_max]
    last = None
    for Xi in candidates:
        ctx.check_range(Xi)
        value, yl, vals = _mellin_pieces(ctx, z, Xi, which, nodes)
        mag = np.abs(vals)
        upper = mag[yl >= Xi / 2].max()
        lower = mag[(yl >= Xi / 4) & (yl < Xi / 2)].max()
        kappa = max(0.0, math.log2(max(upper, 1e-300) / max(lower, 1e-300)))
        C = upper / Xi ** kappa
        rate = v + 0.5 - kappa - 1.0  # integrand envelope ~ x**(kappa - v - 1/2)
        tail = math.inf if rate <= 0 else C * Xi ** (-rate) / rate
        last = MellinResult(value, float(Xi), tail, C, kappa)
        if tail < tol:
            return last
    raise ConvergenceError(f"tail bound {last.tail_bound:.3g} exceeds tol {tol:.3g} at X={last.X:g}")


def mellin_check_h(z, ctx: KernelContext, X: Optional[float] = None, tol: float = 1e-6) -> MellinResult:
    """Truncated Mellin transform of h; compare ``value`` with ``theta_omega(z)``."""
    return mellin_check(z, ctx, X, tol, which="h")


def mellin_check_h1(z, ctx: KernelContext, X: Optional[float] = None, tol: float = 1e-6) -> MellinResult:
    """Truncated Mellin transform of h1; compare with ``(i/z) theta_omega(z)``."""
    return mellin_check(z, ctx, X, tol, which="h1")


def mellin_targets(z, omega: float):
    """Closed-form values (theta, (i/z) theta) of the two Mellin transforms."""
    th = theta_omega(z, omega)
    return th, 1j / complex(z) * th


def _own_term(ctx: KernelContext, n: np.ndarray, t: np.ndarray) -> np.ndarray:
    """term(n, t) with ``n`` varying pointwise (n >= 1, t > n)."""
    u = n / t
    return ctx.c_table[n] / t * (1.0 - u * u) ** (ctx.omega - 1.0) * ctx.G(u)


class MellinProfile:
    """Incomplete transform ``J(x) = integral_x^1 g(u) u**(-iz - 1/2) du`` of the cofactor.

    ``g(u) = (1 - u^2)**(omega - 1) G(u)`` is the profile shared by every
    term of ``h``.  ``J`` is tabulated by Chebyshev interpolation on dyadic
    panels ``[2**-(k+1), 2**-k]``; on the top panel the factor
    ``(1 - x)**omega`` is split off so the interpolant stays smooth.
    """

    def __init__(self, ctx: KernelContext, z, x_min: float, degree: int = 32, nodes: int = 40):
        self.ctx = ctx
        self.z = complex(z)
        om = ctx.omega
        alpha = om - 1.0
        power = -1j * self.z - 0.5
        cheb_x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))  # on [-1, 1]
        sj, wj = qd.gauss_jacobi_right(nodes, alpha)
        sl, wl = qd.gauss_legendre(nodes)

        def smooth_top(u):
            # g(u) u**power / (1 - u)**alpha
            return (1.0 + u) ** alpha * ctx.G(u) * np.exp(power * np.log(u))

        # top panel [1/2, 1]
        xs = 0.75 + 0.25 * cheb_x
        half = 0.5 * (1.0 - xs)
        uu = xs[:, None] + half[:, None] * (sj + 1.0)
        J = np.sum(wj * smooth_top(uu), axis=1) * half ** (alpha + 1.0)
        self._top = cheb.chebfit(cheb_x, J / (1.0 - xs) ** om, degree)
        self._panels = []
        right, J_right = 0.5, complex(self._eval_top(np.array([0.5]))[0])
        while right > x_min:
            left = 0.5 * right
            xs = 0.5 * (left + right) + 0.5 * (right - left) * cheb_x
            hl = 0.5 * (right - xs)
            uu = xs[:, None] + hl[:, None] * (sl + 1.0)
            g = (1.0 - uu * uu) ** alpha * ctx.G(uu) * np.exp(power * np.log(uu))
            J = J_right + np.sum(wl * g, axis=1) * hl
            self._panels.append((left, right, cheb.chebfit(cheb_x, J, degree)))
            J_right = complex(cheb.chebval(-1.0, self._panels[-1][2]))
            right = left
        self.x_min = right

    def _eval_top(self, x):
        return cheb.chebval(4.0 * x - 3.0, self._top) * (1.0 - x) ** self.ctx.omega

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.size and x.min() < self.x_min:
            raise ValueError("x below the tabulated range")
        out = np.zeros(x.shape, dtype=complex)
        top = x >= 0.5
        out[top] = self._eval_top(x[top])
        for left, right, coef in self._panels:
            sel = (x >= left) & (x < right)
            if np.any(sel):
                out[sel] = cheb.chebval((2.0 * x[sel] - left - right) / (right - left), coef)
        return out


def mellin_antiderivative(ctx: KernelContext, z, T, nodes: int = 20, chunk: int = 2_000_000) -> np.ndarray:
    """``integral_1^T h(t) t**(iz - 1/2) dt`` for every entry of ``T``.

    Substituting ``u = n/t`` in each term gives
    ``sum_{n < T} c(n) n**(iz - 1/2) J(n/T)`` with ``J`` from
    :class:`MellinProfile`, so the cost is linear in ``max(T)`` per entry.
    """
    z = complex(z)
    T = np.atleast_1d(np.asarray(T, dtype=float))
    out = np.zeros(T.shape, dtype=complex)
    live = T > 1.0
    if not np.any(live):
        return out
    Tl = T[live]
    top = int(math.floor(Tl.max()))
    ctx.check_range(Tl.max())
    profile = MellinProfile(ctx, z, 1.0 / Tl.max() * 0.999, nodes=max(nodes, 40))
    ns = np.arange(1, top + 1)
    weights = ctx.c_table[ns] * np.exp((1j * z - 0.5) * np.log(ns))
    vals = np.zeros(Tl.size, dtype=complex)
    order = np.argsort(Tl)
    # process entries in chunks of roughly ``chunk`` (entry, n) pairs
    start = 0
    while start < order.size:
        stop = start + 1
        while stop < order.size and (stop - start + 1) * math.floor(Tl[order[stop]]) <= chunk:
            stop += 1
        idx = order[start:stop]
        nmax = int(math.floor(Tl[idx].max()))
        x = ns[None, :nmax] / Tl[idx, None]
        keep = x < 1.0
        J = np.zeros(x.shape, dtype=complex)
        J[keep] = profile(x[keep])
        vals[idx] = J @ weights[:nmax]
        start = stop
    out[live] = vals
    return out


def mellin_antiderivative_segments(ctx: KernelContext, z, T, nodes: int = 20) -> np.ndarray:
    """``integral_1^T h(t) t**(iz - 1/2) dt`` by direct quadrature in ``t``.

    Cost grows like ``max(T)**2``; kept as an independent check of
    :func:`mellin_antiderivative`.

    Whole unit segments are accumulated once; the partial segment
    ``[floor(T), T]`` uses a Gauss--Jacobi rule for its singular term.
    """
    z = complex(z)
    T = np.atleast_1d(np.asarray(T, dtype=float))
    out = np.zeros(T.shape, dtype=complex)
    live = T > 1.0
    if not np.any(live):
        return out
    Tl = T[live]
    top = int(math.floor(Tl.max()))
    ctx.check_range(Tl.max())
    om = ctx.omega
    alpha = om - 1.0
    sj, wj = qd.gauss_jacobi_left(nodes, alpha)
    sl, wl = qd.gauss_legendre(nodes)
    # whole segments [n, n+1] for n < top
    cum = np.zeros(top + 1, dtype=complex)  # cum[n] = integral_1^n
    if top > 1:
        ns = np.arange(1, top)
        yj = ns[:, None] + 0.5 * (sj + 1.0)
        smooth = ctx.c_table[ns][:, None] / yj * ((yj + ns[:, None]) / yj ** 2) ** alpha * ctx.G(ns[:, None] / yj)
        seg = np.sum(wj * 0.5 ** (alpha + 1.0) * smooth * np.exp((1j * z - 0.5) * np.log(yj)), axis=1)
        yl = ns[:, None] + 0.5 * (sl + 1.0)
        rest = _h_sum(yl.ravel(), ctx, ctx.term).reshape(yl.shape) - _own_term(ctx, ns[:, None], yl)
        seg = seg + np.sum(0.5 * wl * rest * np.exp((1j * z - 0.5) * np.log(yl)), axis=1)
        cum[2:] = np.cumsum(seg)
    # partial segments [n, T]
    n = np.floor(Tl).astype(int)
    half = 0.5 * (Tl - n)
    yj = n[:, None] + half[:, None] * (sj + 1.0)
    smooth = ctx.c_table[n][:, None] / yj * ((yj + n[:, None]) / yj ** 2) ** alpha * ctx.G(n[:, None] / yj)
    part = np.sum(wj * smooth * np.exp((1j * z - 0.5) * np.log(yj)), axis=1) * half ** (alpha + 1.0)
    yl = n[:, None] + half[:, None] * (sl + 1.0)
    rest = _h_sum(yl.ravel(), ctx, ctx.term).reshape(yl.shape) - _own_term(ctx, n[:, None], yl)
    part = part + np.sum(wl * rest * np.exp((1j * z - 0.5) * np.log(yl)), axis=1) * half
    out[live] = cum[n] + part
    return out
