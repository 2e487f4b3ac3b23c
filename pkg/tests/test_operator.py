import math

import numpy as np
import pytest
from scipy import integrate

from xicanon import operator as op
from xicanon.errors import RegimeError, SingularError, TruncationError
from xicanon.kernel import KernelContext, h_omega


@pytest.fixture(scope="module")
def op13(ctx15):
    return op.operator_at(ctx15, 1.3)


def test_operator_vanishes_up_to_one(ctx15):
    for a in (0.4, 1.0):
        o = op.operator_at(ctx15, a)
        assert not np.any(o.matrix)
        assert op.det_pair(o) == (1.0, 1.0)
        assert op.log_det_pair(o) == (0.0, 0.0)
        assert op.mu_of_a(ctx15, a) == 0.0
    assert op.kernel_traces(ctx15, 0.9) == (0.0, 0.0)


def test_regime_guard():
    ctx = KernelContext(0.9, n_max=16)
    with pytest.raises(RegimeError):
        op.operator_at(ctx, 1.5)
    with pytest.raises(RegimeError):
        op.watson_apply(ctx, op.Bump(1, 2), 1.0, (1, 2))


def test_grid_is_positive_and_moves(ctx15):
    g = op.build_grid(1.7)
    assert g.a == 1.7 and np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(1.7, rel=1e-13)
    m = g.moved_to(1.71)
    assert m.size == g.size and m.weights.sum() == pytest.approx(1.71, rel=1e-13)


def test_traces_against_adaptive_quadrature(ctx15):
    a = 1.6
    t1, t2 = op.kernel_traces(ctx15, a)
    f1 = lambda x: h_omega(x * x, ctx15)
    ref1 = integrate.quad(f1, 1.0, a, points=[math.sqrt(2.0)], epsabs=1e-13, limit=200)[0]
    f2 = lambda t: h_omega(t, ctx15) ** 2 * math.log(a * a / t)
    ref2 = integrate.quad(f2, 1.0, a * a, points=[2.0], epsabs=1e-13, limit=200)[0]
    assert t1 == pytest.approx(ref1, rel=1e-9)
    assert t2 == pytest.approx(ref2, rel=1e-9)


def test_matrix_is_nearly_symmetric(op13):
    # product-integration rows next to a ridge are not symmetric; the spectrum stays real
    assert op13.asymmetry < 0.05
    ev = np.linalg.eigvals(op13.matrix)
    assert np.max(np.abs(ev.imag)) < 1e-8


def test_determinants_converge_with_resolution(ctx15):
    a = 1.3
    d = [op.det_pair(op.operator_at(ctx15, a, n)) for n in (16, 24, 32)]
    assert abs(d[2][0] - d[1][0]) < 1e-7 and abs(d[2][1] - d[1][1]) < 1e-7


def test_trace_correction_is_small(op13):
    corrected = op.det_pair(op13)
    raw = op.det_pair(op13, corrected=False)
    assert np.allclose(corrected, raw, rtol=1e-3)


def test_condition_estimate(op13):
    for eps in (1, -1):
        est = op13.condition(eps)
        assert est == pytest.approx(op13.condition(eps, exact=True), rel=1e-2)


def test_solve_phi_residual(ctx15, op13):
    for eps in (1, -1):
        sol = op.solve_phi(op13, eps)
        assert sol.residual < 1e-12
        # the extension reproduces the grid values at the nodes
        nodes = op13.grid.nodes[::7]
        assert np.allclose(sol.extension(nodes), sol.grid_values[::7], rtol=1e-8, atol=1e-10)
    with pytest.raises(ValueError):
        op.solve_phi(op13, 2)


def test_phi_below_one_is_kernel(ctx15):
    sol = op.solve_phi(op.operator_at(ctx15, 0.8), 1)
    assert sol.at_endpoint() == h_omega(0.64, ctx15) == 0.0


def test_log_det_derivative_identity(ctx15):
    a = 1.3
    dp, dm = op.log_det_derivatives(ctx15, a)
    o = op.operator_at(ctx15, a)
    assert dp == pytest.approx(op.solve_phi(o, 1).at_endpoint(), rel=1e-6)
    assert dm == pytest.approx(-op.solve_phi(o, -1).at_endpoint(), rel=1e-6)


def test_singular_error_when_determinant_changes_sign(ctx15):
    o = op.operator_at(ctx15, 1.3)
    flipped = op.DiscreteOperator(o.ctx, o.grid, 3.0 * o.matrix, o.trace, o.trace_sq)
    with pytest.raises(SingularError):
        op.det_pair(flipped, corrected=False)


def test_series_low_orders_are_exact(ctx15):
    a = 1.3
    t1, t2 = op.kernel_traces(ctx15, a)
    s = op.fredholm_series(ctx15, a, 0.7, 2)
    assert s.coefficients[1] == pytest.approx(-t1, rel=1e-14)
    assert s.coefficients[2] == pytest.approx(0.5 * (t1 * t1 - t2), rel=1e-14)
    assert s.value == pytest.approx(1 - 0.7 * t1 + 0.49 * 0.5 * (t1 * t1 - t2), rel=1e-14)


def test_series_converges_to_determinant_where_small(ctx15):
    # at a = 1.1 the operator is small and six orders are plenty
    a = 1.1
    dp, dm = op.det_pair(op.operator_at(ctx15, a))
    assert op.fredholm_series(ctx15, a, -1.0, 6).value == pytest.approx(dp, abs=1e-8)
    assert op.fredholm_series(ctx15, a, 1.0, 6).value == pytest.approx(dm, abs=1e-8)


def test_series_guards(ctx15):
    with pytest.raises(ValueError):
        op.fredholm_series(ctx15, 1.3, 1.0, 7)
    with pytest.raises(TruncationError):
        op.fredholm_series(ctx15, 1.3, 1.0, 3, tol=1e-12)
    trivial = op.fredholm_series(ctx15, 0.9, 1.0, 4)
    assert trivial.value == 1.0 and trivial.tail_bound == 0.0


def test_frobenius_within_bound(op13):
    fro, bound = op.frobenius_bound(op13)
    assert 0 < fro <= bound


def test_watson_two_paths(ctx15):
    f = op.Bump(0.8, 1.6)
    for x in (1.0, 2.4):
        d = op.watson_apply(ctx15, f, x, f.support, "direct")
        w = op.watson_apply(ctx15, f, x, f.support, "watson")
        assert abs(d - w) < 1e-5 * max(1.0, abs(d))
    assert op.watson_apply(ctx15, f, 0.5, f.support) == 0.0
    with pytest.raises(ValueError):
        op.watson_apply(ctx15, f, 1.0, f.support, "other")


def test_bump():
    b = op.Bump(1.0, 3.0, height=2.0)
    assert b(2.0) == pytest.approx(2.0 * math.exp(-1.0))
    assert b(np.array([0.5, 1.0, 3.0, 4.0])).tolist() == [0.0, 0.0, 0.0, 0.0]


@pytest.mark.slow
def test_refinement_gate_at_two(ctx15):
    coarse = op.operator_at(ctx15, 2.0, refinement=0)
    fine = op.operator_at(ctx15, 2.0, refinement=1)
    dc, df = op.det_pair(coarse), op.det_pair(fine)
    # the determinants are tiny here, so the absolute gate is easy; log dets are the real test
    assert max(abs(dc[0] - df[0]), abs(dc[1] - df[1])) < 1e-8
    lc, lf = op.log_det_pair(coarse), op.log_det_pair(fine)
    assert abs(lc[0] - lf[0]) < 1e-6 and abs(lc[1] - lf[1]) < 1e-4


@pytest.mark.slow
def test_isometry_on_growing_domains(ctx15):
    f = op.Bump(1.1, 1.8)
    r5 = op.isometry_ratio(ctx15, f, f.support, 5.0)
    r10 = op.isometry_ratio(ctx15, f, f.support, 10.0)
    assert r5 <= r10 <= 1.0 + 1e-8
    assert abs(r10 - r5) < 0.02 and abs(1.0 - r10) < 1e-3
