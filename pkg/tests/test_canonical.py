import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xicanon import canonical as can
from xicanon.errors import ContourError, ConvergenceError, RegimeError
from xicanon.kernel import KernelContext
from xicanon.specfun import ab_omega


def test_initial_state_matches_closed_form_at_one():
    for z in (2.0, 1 + 0.5j, -3.3):
        s0 = can.ab_initial(z, 1.5)
        s1 = can.ab_closed_form(z, 1.5, 1.0)
        assert complex(s0.A) == pytest.approx(complex(s1.A), rel=1e-13)
        assert complex(s0.B) == pytest.approx(complex(s1.B), rel=1e-13)


@pytest.mark.parametrize("z", [2.0, 0.7 + 0.4j, 5.5])
def test_evolution_below_one_is_closed_form(z):
    s = can.ab_initial(z, 1.5)
    for a in (0.9, 0.5, 0.1):
        e = can.evolve(s, a)
        c = can.ab_closed_form(z, 1.5, a)
        assert abs(complex(e.A) - complex(c.A)) < 1e-12 * abs(complex(c.A)) + 1e-14
        assert abs(complex(e.B) - complex(c.B)) < 1e-12 * abs(complex(c.B)) + 1e-14


def test_closed_form_validation():
    with pytest.raises(ValueError):
        can.ab_closed_form(1.0, 1.5, 1.2)
    with pytest.raises(ValueError):
        can.evolve(can.ab_initial(1.0, 1.5), 1.5)


def test_mcurve_sources_agree(mcurve15):
    assert mcurve15.agreement < 1e-4
    assert mcurve15.m_values[0] == 1.0 and mcurve15.mu_values[0] == 0.0
    assert np.all(np.diff(mcurve15.m_values) > 0)


def test_mu_is_log_derivative_of_m(mcurve15):
    a = np.array([1.2, 1.45, 1.6, 1.9])
    h = 1e-5
    fd = (mcurve15.log_m_at(a * (1 + h)) - mcurve15.log_m_at(a * (1 - h))) / (math.log1p(h) - math.log1p(-h))
    assert np.allclose(fd, mcurve15.mu_at(a), rtol=1e-6)


def test_mcurve_resampled(mcurve15):
    a = np.array([1.0, 1.33, 1.77])
    r = mcurve15.resampled(a)
    assert np.allclose(r.m_values, mcurve15.m_at(a))
    assert r.alt_m_values is None
    with pytest.raises(ValueError):
        mcurve15.resampled([2.5])


def test_mcurve_validation(ctx15):
    with pytest.raises(ValueError):
        can.MCurve(1.5, np.array([1.0, 1.0]), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        can.MCurve(1.5, np.array([1.0, 2.0]), np.zeros(2), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        can.MCurve(1.5, np.array([1.0]), np.zeros(1), np.ones(1), source="guess")
    with pytest.raises(ValueError):
        can.m_curve(ctx15, [1.0, 0.5])
    with pytest.raises(RegimeError):
        can.m_curve(ctx15, [1.0, 4.5])
    with pytest.raises(RegimeError):
        can.m_curve(KernelContext(0.9, n_max=8), [1.0, 1.5])


def test_z_zero_is_stationary(mcurve15):
    s = can.ab_initial(0.0, 1.5)
    e = can.evolve(s, 1.9, mcurve15)
    # at z = 0 the gauge variables obey a u' = -mu u, a v' = mu v, so A and B stay put
    assert complex(e.A) == pytest.approx(complex(s.A), rel=1e-8)
    assert abs(complex(e.B)) < 1e-12


def test_evolution_is_reversible(mcurve15):
    s = can.ab_initial(1.5 + 0.2j, 1.5)
    fwd = can.evolve(s, 1.6, mcurve15)
    back = can.evolve(fwd, 1.0, mcurve15)
    assert complex(back.A) == pytest.approx(complex(s.A), rel=1e-6)
    assert complex(back.B) == pytest.approx(complex(s.B), rel=1e-6)


def test_evolve_path_is_sequential(mcurve15):
    s = can.ab_initial(2.0, 1.5)
    path = can.evolve_path(s, [1.2, 1.5], mcurve15)
    direct = can.evolve(s, 1.5, mcurve15)
    assert complex(path[-1].A) == pytest.approx(complex(direct.A), rel=1e-6)


def test_direct_ab_guards(ctx15):
    with pytest.raises(ConvergenceError):
        can.direct_ab(ctx15, 1.5, 1 + 1.8j)
    closed = can.direct_ab(ctx15, 0.7, 1 + 1.0j)
    ref = can.ab_closed_form(1 + 1.0j, 1.5, 0.7)
    assert complex(closed.A) == complex(ref.A)


def test_direct_ab_matches_evolution_at_moderate_a(ctx15, mcurve15):
    z = 1 + 3.5j
    a = 1.5
    d = can.direct_ab(KernelContext(1.5, n_max=65536), a, z)
    e = can.evolve(can.ab_initial(z, 1.5), a, mcurve15)
    assert abs(complex(d.A) - complex(e.A)) < 1e-3 * abs(complex(d.A))
    assert abs(complex(d.B) - complex(e.B)) < 1e-3 * abs(complex(d.B))


def _synthetic_curve():
    a = np.exp(np.linspace(0.0, 0.6, 61))
    t = np.log(a)
    logm = t ** 3 + t
    return can.MCurve(1.5, a, 3 * t ** 2 + 1, np.exp(logm)), t


def test_potentials_on_known_curve():
    mc, t = _synthetic_curve()
    p = can.potentials(mc)
    tt = t[1:-1]
    mu = 3 * tt ** 2 + 1
    dmu = 6 * tt
    assert np.allclose(p.mu, mu, atol=1e-4)
    assert np.allclose(p.v_plus, mu ** 2 - dmu, atol=1e-3)
    assert np.allclose(p.v_minus, mu ** 2 + dmu, atol=1e-3)
    assert np.allclose(p.v_plus + p.v_minus, 2 * p.mu ** 2, rtol=1e-13)


def test_potentials_needs_three_points():
    mc = can.MCurve(1.5, np.array([1.0, 1.1]), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        can.potentials(mc)


def test_schrodinger_residual_on_exact_solution():
    # mu = 0: psi = A = cos-type combination, V = 0, psi'' = -z^2 psi in log a
    z = 1.7
    states = [can.ab_closed_form(z, 1.5, a) for a in (0.5 * math.exp(-1e-3), 0.5, 0.5 * math.exp(1e-3))]
    assert can.schrodinger_residual(*states, 0.0) < 1e-6
    with pytest.raises(ValueError):
        can.schrodinger_residual(states[0], states[1], can.ab_closed_form(z, 1.5, 0.9), 0.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 3.9), st.floats(-0.9, 0.9)), min_size=1, max_size=5),
       st.lists(st.tuples(st.floats(-3, 8), st.floats(1.3, 4)), max_size=3))
def test_contour_count_polynomial(inside, outside):
    roots = [complex(x, y) for x, y in inside] + [complex(x, y) for x, y in outside]
    f = lambda z: np.prod([np.asarray(z) - r for r in roots], axis=0)
    try:
        n, _ = can.contour_count(f, 0.0, 4.0, -1.0, 1.0, rel_floor=1e-12)
    except ContourError:
        return
    assert n == len(inside)


def test_contour_error_near_zero():
    with pytest.raises(ContourError):
        can.contour_count(lambda z: np.asarray(z) - 1.0, 1.0, 2.0, -1.0, 1.0)


def test_interlace():
    assert can.interlace(np.array([1.0, 3.0]), np.array([0.0, 2.0, 4.0]))
    assert not can.interlace(np.array([1.0, 1.5]), np.array([2.0]))
    assert can.interlace(np.array([]), np.array([1.0]))


def test_zeros_against_mpmath():
    omega = 1.5
    rep = can.zeros_of_A(omega, 20.0)
    mpmath.mp.dps = 30

    def A(t):
        s = mpmath.mpf(0.5) - 1j * t
        xi = lambda w: w * (w - 1) / 2 * mpmath.pi ** (-w / 2) * mpmath.gamma(w / 2) * mpmath.zeta(w)
        return mpmath.re((xi(s + omega) + xi(s - omega)) / 2)

    refs = [float(mpmath.findroot(A, float(r))) for r in rep.zeros]
    assert np.allclose(rep.zeros, refs, atol=1e-10)
    assert rep.contour_count == rep.zeros.size and rep.interlaced
    assert rep.b_zeros[0] == 0.0
    A0, B0 = ab_omega(rep.b_zeros[1:], omega)
    assert np.all(np.abs(B0) < 1e-12 * np.abs(A0))
    with pytest.raises(ValueError):
        can.zeros_of_A(0.4, 10.0)
