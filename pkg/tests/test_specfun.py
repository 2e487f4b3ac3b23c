import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xicanon.errors import NonFiniteError, PoleError
from xicanon.specfun import (ComplexValue, XiEvaluator, _xi_direct, ab_omega, a_omega, b_omega,
                             log_gamma, theta_omega, xi, xi_theta_series, zeta)

mpmath.mp.dps = 30


def mp_xi(s):
    s = mpmath.mpc(s)
    return complex(s * (s - 1) / 2 * mpmath.pi ** (-s / 2) * mpmath.gamma(s / 2) * mpmath.zeta(s))


@pytest.mark.parametrize("s", [2.0, 0.5 + 14.134725j, 0.3 + 5j, 3 - 20j, -1.5 + 2j, 1.0, 0.0, 0.5 + 60j])
def test_xi_matches_mpmath(s):
    ref = mp_xi(s) if s not in (0.0, 1.0) else 0.5
    assert abs(complex(xi(s)) - ref) <= 1e-12 * max(1.0, abs(ref)) + 1e-300


@pytest.mark.parametrize("s", [2.5 + 1j, 0.5 + 30j, -3.2 + 0.7j, 0.1 - 8j])
def test_zeta_matches_mpmath(s):
    ref = complex(mpmath.zeta(s))
    assert abs(complex(zeta(s)) - ref) <= 1e-12 * abs(ref)


def test_zeta_pole():
    with pytest.raises(PoleError):
        zeta(1.0)


@pytest.mark.parametrize("s", [0.5 + 3j, 10.25 - 40j, -2.5 + 0.5j, 100.0])
def test_log_gamma_matches_mpmath(s):
    assert abs(complex(log_gamma(s)) - complex(mpmath.loggamma(s))) < 1e-12 * max(1, abs(s))


@pytest.mark.parametrize("s", [0.5 + 14.134725141734693j, 0.7 + 3j, 2.0 + 25j, -0.4 - 6j])
def test_xi_two_paths(s):
    a, b = complex(xi(s)), complex(xi_theta_series(s))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 2.5), st.floats(-40, 40))
def test_xi_functional_equation(re, im):
    s = complex(re, im)
    a, b = complex(_xi_direct(s)), complex(_xi_direct(1 - s))
    assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1e-300)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50))
def test_xi_real_on_critical_line(t):
    v = complex(xi(0.5 + 1j * t))
    assert abs(v.imag) <= 1e-12 * max(abs(v), 1e-300)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.55, 3.0), st.floats(-40, 40))
def test_theta_unimodular_on_real_line(omega, u):
    assert abs(abs(complex(theta_omega(u, omega))) - 1.0) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.6, 3.0), st.floats(-30, 30), st.floats(-0.5, 0.5))
def test_theta_reflection(omega, re, im):
    z = complex(re, im)
    assert abs(complex(theta_omega(z, omega)) * complex(theta_omega(-z, omega)) - 1.0) < 1e-10


def test_theta_at_zero_and_vectorized():
    assert complex(theta_omega(0.0, 1.5)) == pytest.approx(1.0, abs=1e-14)
    z = np.array([[0.5, 1.0], [2.0 + 0.3j, -4.0]])
    out = theta_omega(z, 1.5)
    assert out.shape == z.shape
    assert complex(out[1, 0]) == pytest.approx(complex(theta_omega(2.0 + 0.3j, 1.5)), rel=1e-15)


def test_theta_pole_guard():
    # the denominator xi(1/2 + omega - iz) vanishes at z = -gamma - i omega
    gamma1 = float(mpmath.zetazero(1).imag)
    omega = 1.5
    with pytest.raises(PoleError):
        theta_omega(complex(-gamma1, -omega), omega)
    assert np.isfinite(complex(theta_omega(complex(-gamma1, -omega + 0.1), omega)))


def test_theta_guard_is_absolute_at_large_heights():
    # xi decays like exp(-pi |t| / 4), so the absolute guard trips on the real line
    with pytest.raises(PoleError):
        theta_omega(60.0, 1.5)


def test_ab_relations():
    z = np.array([0.3, 2.0 + 0.4j, -7.0])
    omega = 1.5
    A, B = ab_omega(z, omega)
    s = 0.5 - 1j * z
    assert np.allclose(A - 1j * B, xi(s + omega), rtol=1e-14)
    assert np.allclose(A + 1j * B, xi(s - omega), rtol=1e-14)
    assert np.allclose(a_omega(z, omega), A) and np.allclose(b_omega(z, omega), B)


@settings(max_examples=30, deadline=None)
@given(st.floats(-40, 40), st.floats(0.6, 2.5))
def test_ab_real_even_odd(t, omega):
    A, B = ab_omega(t, omega)
    Am, Bm = ab_omega(-t, omega)
    scale = max(abs(complex(A)), abs(complex(B)), 1e-300)
    assert abs(complex(A).imag) <= 1e-12 * scale and abs(complex(B).imag) <= 1e-12 * scale
    assert abs(complex(A) - complex(Am)) <= 1e-12 * scale
    assert abs(complex(B) + complex(Bm)) <= 1e-12 * scale


def test_complex_value():
    c = ComplexValue.of(1 + 2j)
    assert complex(c) == 1 + 2j
    with pytest.raises(NonFiniteError):
        ComplexValue(math.nan, 0.0)


def test_evaluator_validation():
    with pytest.raises(ValueError):
        XiEvaluator(euler_maclaurin_terms=0)
    with pytest.raises(ValueError):
        XiEvaluator(theta_series_cutoff=0)
