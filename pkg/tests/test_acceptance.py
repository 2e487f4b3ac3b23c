"""One test per acceptance criterion, at their stated tolerances.

Each test prints a single ``criterion N PASS|FAIL|INFO`` line; the lines
are repeated in the pytest terminal summary.
"""

import math

import pytest

from xicanon import verification as ver

CFG = ver.RunConfig()


def by_name(results, *names):
    found = {r.name: r for r in results}
    return [found[n] for n in names]


@pytest.fixture(scope="module")
def theta_results():
    return ver.check_theta(CFG)


@pytest.fixture(scope="module")
def canonical_results(mcurve15):
    return ver.check_canonical(CFG, mcurve15)


def test_criterion_01_theta_unimodular(theta_results, record):
    assert record(1, by_name(theta_results, "theta_unitarity"))


def test_criterion_02_theta_normalization_and_reflection(theta_results, record):
    assert record(2, by_name(theta_results, "theta_normalization", "theta_reflection"))


def test_criterion_03_mellin_identities(record):
    assert record(3, ver.check_mellin(CFG))


def test_criterion_04_h1_two_paths(record):
    assert record(4, ver.check_h1_paths(CFG))


def test_criterion_05_operator_laws(record):
    assert record(5, ver.check_operator_laws(CFG))


def test_criterion_06_log_determinant_derivative(record):
    assert record(6, ver.check_determinant_derivative(CFG))


def test_criterion_07_fredholm_series(record):
    assert record(7, ver.check_fredholm_series(CFG))


def test_criterion_08_mcurve_sources(mcurve15, record):
    assert record(8, ver.check_mcurve(CFG, mcurve15))


def test_criterion_09_canonical_system(canonical_results, record):
    names = ("canonical_parity", "canonical_realness", "canonical_two_paths")
    assert record(9, by_name(canonical_results, *names))


def test_criterion_10_limit_at_one(canonical_results, record):
    assert record(10, by_name(canonical_results, "limit_at_one"))


def test_criterion_11_schrodinger_residual(canonical_results, record):
    assert record(11, by_name(canonical_results, "schrodinger_residual"))


def test_criterion_12_zero_count_and_interlacing(record):
    assert record(12, ver.check_zeros(CFG))


def test_criterion_13_h1_trend_is_recorded(record):
    results = ver.check_h1_trend(CFG)
    record(13, results, gate=False)
    # not a gate: only require that the values were produced
    assert all(math.isfinite(v) for v in results[0].values.values())
    assert not results[0].gate


def test_criterion_14_watson_equality(record):
    assert record(14, ver.check_watson(CFG))
