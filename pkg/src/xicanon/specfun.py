"""Complex special functions: log-gamma, zeta, the completed zeta function xi,
the structure function theta_omega and the pair (A^omega, B^omega).

Two independent evaluation paths exist for xi:

* ``xi`` combines log-gamma with an Euler--Maclaurin evaluation of
  ``(s - 1) * zeta(s)``, which is analytic at ``s = 1``.
* ``xi_theta_series`` integrates the theta-series kernel against ``x**(s-1)``
  along a rotated ray, which keeps the integrand free of cancellation even
  high up the critical strip.

All functions accept Python scalars, :class:`ComplexValue` or numpy arrays and
return values of matching shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special as sp

from .errors import NonFiniteError, PoleError

LOG_PI = math.log(math.pi)
#: Relative size below which ``|xi|`` is treated as a zero of a denominator.
POLE_GUARD = 1e-14


@dataclass(frozen=True)
class ComplexValue:
    """A complex number stored as two finite doubles."""

    re: float
    im: float

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise NonFiniteError(f"non-finite ComplexValue ({self.re}, {self.im})")

    def __complex__(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z) -> "ComplexValue":
        z = complex(z)
        return cls(z.real, z.imag)


Number = Union[complex, float, ComplexValue, np.ndarray]


@dataclass(frozen=True)
class XiEvaluator:
    """Truncation parameters for the two xi paths.

    Parameters
    ----------
    euler_maclaurin_terms : int
        Number of leading terms summed directly in the Euler--Maclaurin formula.
    bernoulli_order : int
        Highest Bernoulli number index used in the correction terms (even).
    theta_series_cutoff : int
        Number of terms kept in the theta-series kernel.
    """

    euler_maclaurin_terms: int = 40
    bernoulli_order: int = 20
    theta_series_cutoff: int = 12

    def __post_init__(self):
        if self.euler_maclaurin_terms < 1 or self.bernoulli_order < 2:
            raise ValueError("euler_maclaurin_terms >= 1 and bernoulli_order >= 2 required")
        if self.theta_series_cutoff < 1:
            raise ValueError("theta_series_cutoff must be >= 1")


DEFAULT_EVALUATOR = XiEvaluator()


def _as_array(s) -> Tuple[np.ndarray, bool]:
    if isinstance(s, ComplexValue):
        s = complex(s)
    arr = np.asarray(s, dtype=complex)
    return arr, arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool, what: str):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} produced a non-finite value")
    return complex(arr) if scalar else arr


def _is_nonpositive_integer(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def log_gamma(s: Number):
    """Principal branch of log Gamma(s).

    The branch cut runs along the negative real axis and the value agrees
    with the real log-gamma on the positive axis.

    Raises
    ------
    PoleError
        If ``s`` is a nonpositive integer.
    """
    z, scalar = _as_array(s)
    if np.any(_is_nonpositive_integer(z)):
        raise PoleError("log_gamma has poles at the nonpositive integers")
    return _out(sp.loggamma(z), scalar, "log_gamma")


def _bernoulli_even(order: int) -> np.ndarray:
    """B_2, B_4, ..., B_order."""
    b = sp.bernoulli(order)
    return np.array([b[2 * k] for k in range(1, order // 2 + 1)])


def _zeta_times_pole(z: np.ndarray, ev: XiEvaluator) -> np.ndarray:
    """(s - 1) * zeta(s) by Euler--Maclaurin, valid for Re s > -1 (entire in s)."""
    N = ev.euler_maclaurin_terms
    n = np.arange(1, N, dtype=float)
    zf = z.reshape(-1)
    # direct head of the series
    head = np.exp(-np.outer(zf, np.log(n))).sum(axis=1) if N > 1 else np.zeros_like(zf)
    logN = math.log(N)
    Nms = np.exp(-zf * logN)
    tail = 0.5 * Nms
    rising = zf.copy()  # s (s+1) ... (s+2k-2)
    fact = 2.0  # (2k)!
    bern = _bernoulli_even(ev.bernoulli_order)
    power = Nms / N  # N^{-s-1}
    for k, b2k in enumerate(bern, start=1):
        tail = tail + b2k / fact * rising * power
        rising = rising * (zf + 2 * k - 1) * (zf + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
        power = power / (N * N)
    out = (zf - 1.0) * (head + tail) + N * Nms
    return out.reshape(z.shape)


def zeta(s: Number, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """Riemann zeta function.

    Euler--Maclaurin summation for ``Re s >= 0``; the functional equation
    maps ``Re s < 0`` onto the right half-plane.

    Raises
    ------
    PoleError
        At ``s = 1``.
    """
    z, scalar = _as_array(s)
    if np.any(z == 1.0):
        raise PoleError("zeta has a pole at s = 1")
    out = np.empty_like(z)
    right = z.real >= 0
    if np.any(right):
        zr = z[right]
        out[right] = _zeta_times_pole(zr, evaluator) / (zr - 1.0)
    left = ~right
    if np.any(left):
        zl = z[left]
        w = 1.0 - zl
        # sin(pi s / 2) / (w - 1) = -(pi / 2) sinc(s / 2): no division near s = 0,
        # and the trivial zeros at negative even integers stay exact
        factor = np.exp(zl * math.log(2.0) + (zl - 1.0) * LOG_PI + sp.loggamma(w))
        out[left] = -0.5 * math.pi * factor * np.sinc(0.5 * zl) * _zeta_times_pole(w, evaluator)
    return _out(out, scalar, "zeta")


def _xi_parts(w: np.ndarray, ev: XiEvaluator) -> Tuple[np.ndarray, np.ndarray]:
    """Split xi(w) = exp(L) * Z after reflecting w into Re w >= 1/2.

    ``L`` carries the pi-power and gamma factor, ``Z = (w - 1) zeta(w)``.
    Working with the pair avoids underflow of the gamma factor at large
    heights when ratios of xi values are formed.
    """
    w = np.where(w.real < 0.5, 1.0 - w, w)
    L = -0.5 * w * LOG_PI + sp.loggamma(0.5 * w + 1.0)
    Z = _zeta_times_pole(w, ev)
    return L, Z


def xi(s: Number, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """Completed zeta function ``xi(s) = s(s-1)/2 pi^(-s/2) Gamma(s/2) zeta(s)``.

    Entire; evaluated on ``Re s >= 1/2`` and extended by ``xi(s) = xi(1-s)``.
    """
    z, scalar = _as_array(s)
    L, Z = _xi_parts(z, evaluator)
    return _out(np.exp(L) * Z, scalar, "xi")


def _xi_direct(s: Number, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """xi without the reflection step; used to test the functional equation.

    Valid for ``Re s > -2``, where the gamma factor has no poles.
    """
    z, scalar = _as_array(s)
    L = -0.5 * z * LOG_PI + sp.loggamma(0.5 * z + 1.0)
    Z = np.empty_like(z)
    right = z.real >= 0
    Z[right] = _zeta_times_pole(z[right], evaluator)
    if np.any(~right):
        zl = z[~right]
        Z[~right] = (zl - 1.0) * zeta(zl, evaluator)
    return _out(np.exp(L) * Z, scalar, "xi")


def theta_kernel(x: np.ndarray, cutoff: int) -> np.ndarray:
    """phi(x) = 2 sum_n (2 pi^2 n^4 x^4 - 3 pi n^2 x^2) exp(-pi n^2 x^2), |arg x| < pi/4.

    Only meant for ``|x| >= 1`` where the series converges fast; smaller
    arguments go through ``phi(x) = phi(1/x) / x``.
    """
    n2 = np.arange(1, cutoff + 1, dtype=float) ** 2
    q = np.pi * np.multiply.outer(x * x, n2)
    return 2.0 * np.sum((2.0 * q * q - 3.0 * q) * np.exp(-q), axis=-1)


def xi_theta_series(s: Number, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """xi(s) as the Mellin transform of the theta-series kernel.

    The ray of integration is rotated to ``x = r exp(i theta)`` with
    ``theta`` approaching ``sign(Im s) * pi/4`` as ``|Im s|`` grows, so the
    integrand carries no exponential cancellation.  The integral over
    ``u = log r`` is then done by the trapezoid rule, which converges
    geometrically for this analytic, doubly decaying integrand.
    """
    z, scalar = _as_array(s)
    flat = z.reshape(-1)
    res = np.empty_like(flat)
    for k, sk in enumerate(flat):
        res[k] = _theta_series_one(complex(sk), evaluator.theta_series_cutoff)
    return _out(res.reshape(z.shape), scalar, "xi_theta_series")


def _theta_series_one(s: complex, cutoff: int) -> complex:
    t = s.imag
    delta = math.pi / 4 if abs(t) < 4.0 / (math.pi / 4) else 4.0 / abs(t)
    theta = math.copysign(math.pi / 4 - delta, t) if t != 0 else 0.0
    c2 = math.cos(2 * theta)
    sig = abs(s.real - 0.5) + 3.0
    # both tails decay like exp(-pi c2 e^{2|u|}) against growth exp(sig |u|)
    U = 0.5
    while math.pi * c2 * math.exp(2 * U) - sig * U < 45.0:
        U += 0.05
    # analytic strip half-width is pi/4 - |theta| = delta
    h = 2 * math.pi * delta / (45.0 + delta * abs(t) + sig)
    m = int(math.ceil(U / h))
    u = np.arange(-m, m + 1) * h
    x = np.exp(u + 1j * theta)
    phi = np.empty_like(x)
    big = u >= 0
    phi[big] = theta_kernel(x[big], cutoff)
    phi[~big] = theta_kernel(1.0 / x[~big], cutoff) / x[~big]
    integral = h * np.sum(phi * np.exp(s * u))
    return complex(np.exp(1j * theta * s) * integral)


def theta_omega(z: Number, omega: float, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """Theta_omega(z) = xi(1/2 - omega - iz) / xi(1/2 + omega - iz).

    Raises
    ------
    PoleError
        If the denominator is below ``1e-14 * (1 + |s|)`` in modulus.
    """
    zz, scalar = _as_array(z)
    num_arg = 0.5 + omega + 1j * zz  # xi(1/2 - omega - iz) = xi(1/2 + omega + iz)
    den_arg = 0.5 + omega - 1j * zz
    L1, Z1 = _xi_parts(num_arg, evaluator)
    L2, Z2 = _xi_parts(den_arg, evaluator)
    with np.errstate(under="ignore"):
        den_mod = np.exp(L2.real) * np.abs(Z2)
    if np.any(den_mod < POLE_GUARD * (1.0 + np.abs(den_arg))):
        raise PoleError("xi(1/2 + omega - iz) vanishes within tolerance")
    return _out(np.exp(L1 - L2) * (Z1 / Z2), scalar, "theta_omega")


def ab_omega(z: Number, omega: float, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """The pair (A^omega(z), B^omega(z)).

    With ``s = 1/2 - iz``::

        A = (xi(s + omega) + xi(s - omega)) / 2
        B = i (xi(s + omega) - xi(s - omega)) / 2

    so that ``A - iB = xi(1/2 + omega - iz)``.
    """
    zz, scalar = _as_array(z)
    s = 0.5 - 1j * zz
    xp = np.asarray(xi(s + omega, evaluator))
    xm = np.asarray(xi(s - omega, evaluator))
    A = 0.5 * (xp + xm)
    B = 0.5j * (xp - xm)
    if scalar:
        return complex(A), complex(B)
    return A, B


def a_omega(z: Number, omega: float, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """A^omega(z), the even member of the pair."""
    return ab_omega(z, omega, evaluator)[0]


def b_omega(z: Number, omega: float, evaluator: XiEvaluator = DEFAULT_EVALUATOR):
    """B^omega(z), the odd member of the pair."""
    return ab_omega(z, omega, evaluator)[1]
