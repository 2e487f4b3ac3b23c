import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xicanon.errors import ConvergenceError, DomainError, RangeError
from xicanon.kernel import (BetaIntegralSpec, KernelContext, MellinProfile, beta_tail, g1_omega,
                            g1_omega_quadrature, g_omega, g_omega_exact, h1_omega, h1_omega_integral,
                            h_omega, jordan_c, mellin_antiderivative, mellin_antiderivative_segments,
                            mellin_check_h, mellin_check_h1, mellin_targets)
from xicanon.specfun import theta_omega

mpmath.mp.dps = 25


def mp_beta_tail(z, p, q):
    return float(mpmath.quad(lambda t: t ** (p - 1) * (1 - t) ** (q - 1), [z, 0.5, 1]))


def mp_g(x, omega):
    pref = 2 * mpmath.pi ** omega / mpmath.gamma(omega)
    return float(pref * (x ** (2 - omega) * (1 - x * x) ** (omega - 1)
                         - omega * x ** (omega - 1) * mp_beta_tail(x * x, 1.5 - omega, omega)))


def prime_factors(n):
    out, p = set(), 2
    while p * p <= n:
        while n % p == 0:
            out.add(p)
            n //= p
        p += 1
    if n > 1:
        out.add(n)
    return out


@pytest.mark.parametrize("z,p,q", [(0.3, 2.0, 1.5), (1e-4, -0.5, 1.5), (0.7, 0.25, 0.6), (1e-9, -1.0, 2.5)])
def test_beta_tail_matches_mpmath(z, p, q):
    assert beta_tail(z, p, q) == pytest.approx(mp_beta_tail(z, p, q), rel=1e-12)


def test_beta_tail_validation():
    with pytest.raises(DomainError):
        beta_tail(0.5, 1.0, 0.0)
    with pytest.raises(DomainError):
        beta_tail(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        BetaIntegralSpec(1.0, 1.0, 1.0)
    assert BetaIntegralSpec(0.25, 1.0, 1.0).evaluate() == pytest.approx(0.75, rel=1e-14)


def test_context_validation():
    with pytest.raises(DomainError):
        KernelContext(0.0)
    with pytest.raises(DomainError):
        KernelContext(1.5, n_max=0)


def test_jordan_coefficients(ctx15):
    for n in [1, 2, 6, 12, 97, 360, 4096]:
        ref = n ** 1.5
        for p in prime_factors(n):
            ref *= 1 - p ** -3.0
        assert jordan_c(n, ctx15) == pytest.approx(ref, rel=1e-14)
    with pytest.raises(RangeError):
        jordan_c(0, ctx15)
    with pytest.raises(RangeError):
        ctx15.c(4097)


@pytest.mark.parametrize("omega", [0.75, 1.25, 1.5, 2.5])
def test_tables_are_accurate(omega):
    ctx = KernelContext(omega, n_max=8)
    assert ctx.table_error < 1e-12
    x = np.array([1e-6, 0.01, 0.3, 0.77, 0.999])
    ref = np.array([mp_g(float(v), omega) for v in x])
    assert np.allclose(g_omega(x, ctx), ref, rtol=1e-10, atol=1e-12)
    assert np.allclose(g_omega_exact(x, omega), ref, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("omega", [0.5, 1.5, 2.0])
@pytest.mark.parametrize("x", [0.02, 0.4, 0.9])
def test_g1_closed_form_matches_quadrature(omega, x):
    ctx = KernelContext(omega, n_max=4)
    ref = g1_omega_quadrature(x, ctx)
    assert g1_omega(x, ctx) == pytest.approx(ref, rel=1e-10, abs=1e-13)


def test_g_domain(ctx15):
    assert g_omega(1.5, ctx15) == 0.0 and g1_omega(2.0, ctx15) == 0.0
    with pytest.raises(DomainError):
        g_omega(-0.1, ctx15)
    with pytest.raises(DomainError):
        g_omega(1.0, KernelContext(0.8, n_max=4))


def test_h_brute_force(ctx15):
    x = 17.3
    ref = sum(jordan_c(n, ctx15) * mp_g(n / x, 1.5) for n in range(1, 18)) / x
    assert h_omega(x, ctx15) == pytest.approx(ref, rel=1e-10)
    assert h_omega(0.5, ctx15) == 0.0


def test_h_errors(ctx15):
    with pytest.raises(RangeError):
        h_omega(4097.5, ctx15)
    with pytest.raises(DomainError):
        h_omega(3.0, KernelContext(0.9, n_max=8))


def test_h1_two_paths(ctx15):
    x = np.array([1.5, 2.0, 7.25, 31.9])
    assert np.allclose(h1_omega(x, ctx15), h1_omega_integral(x, ctx15), rtol=1e-11, atol=1e-13)


def test_mellin_profile_matches_quadrature(ctx15):
    z = 1.0 + 3.0j
    prof = MellinProfile(ctx15, z, 1e-3)
    for x in [0.001, 0.03, 0.49, 0.5, 0.8, 0.999]:
        f = lambda u: mp_g(float(u), 1.5) * mpmath.power(u, -1j * z - 0.5)
        ref = complex(mpmath.quad(f, [x, 0.5, 1] if x < 0.5 else [x, 1]))
        assert abs(complex(prof(np.array([x]))[0]) - ref) < 1e-11 * max(1.0, abs(ref))
    with pytest.raises(ValueError):
        prof(np.array([1e-5]))


def test_mellin_antiderivative_two_paths(ctx15):
    z = 2.0 + 3.5j
    T = np.array([0.5, 1.0, 1.7, 9.0, 40.5, 300.25])
    a = mellin_antiderivative(ctx15, z, T)
    b = mellin_antiderivative_segments(ctx15, z, T)
    assert a[0] == 0 and a[1] == 0
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(b))


@pytest.mark.slow
@pytest.mark.parametrize("which", ["h", "h1"])
def test_mellin_transform_reproduces_theta(ctx15, which):
    z = 1.0 + 3.0j
    res = mellin_check_h(z, ctx15) if which == "h" else mellin_check_h1(z, ctx15)
    th, th1 = mellin_targets(z, 1.5)
    target = th if which == "h" else th1
    assert abs(res.value - complex(target)) <= res.tail_bound + 1e-6
    assert res.tail_bound < 1e-6


def test_mellin_convergence_region(ctx15):
    with pytest.raises(ConvergenceError):
        mellin_check_h(1.0 + 1.9j, ctx15)
    with pytest.raises(ConvergenceError):
        mellin_check_h(1.0 + 2.1j, ctx15, X=64, tol=1e-12)
    with pytest.raises(ValueError):
        from xicanon.kernel import mellin_check
        mellin_check(1 + 4j, ctx15, which="g")


def test_mellin_targets():
    z = 0.7 + 2.6j
    th, th1 = mellin_targets(z, 1.5)
    assert complex(th) == complex(theta_omega(z, 1.5))
    assert complex(th1) == pytest.approx(1j / z * complex(th), rel=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.05, 60.0))
def test_h1_finite(x):
    ctx = KernelContext(1.5, n_max=64)
    assert math.isfinite(h1_omega(x, ctx))
