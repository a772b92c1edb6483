import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wvdisks import entire
from wvdisks.entire import COSH, EXP, EXPM, QUADEXP, LogComplex, PrecisionLossError


def test_max_term_exp_integer_tie_goes_up():
    log_mu, nu = entire.max_term(EXP, 10.0)
    assert nu == 10
    assert log_mu == pytest.approx(10 * math.log(10) - math.lgamma(11))


@pytest.mark.parametrize("r", [1.5, 10.5, 37.2, 99.9])
def test_central_index_of_exp_is_floor(r):
    assert entire.max_term(EXP, r)[1] == math.floor(r)


def test_max_term_polynomial():
    log_mu, nu = entire.max_term(entire.polynomial([1, 1]), 2.0)
    assert nu == 1 and log_mu == pytest.approx(math.log(2))


def test_max_term_sparse_series():
    assert entire.max_term(entire.lacunary(2), 50.0)[1] == 64
    assert entire.max_term(QUADEXP, 10.0)[1] == 200


def test_eval_known_values():
    assert entire.eval(EXP, LogComplex(math.log(25.0), 0.0)).log_mag == pytest.approx(25.0, rel=1e-14)
    w = entire.eval(EXP, 1j * math.pi).to_complex()
    assert w == pytest.approx(-1.0, abs=1e-13)
    assert entire.eval(COSH, 3.0).to_complex().real == pytest.approx(math.cosh(3.0), rel=1e-14)
    z = 2.0 - 1.5j
    assert entire.eval(EXP, z).to_complex() == pytest.approx(complex(np.exp(z)), rel=1e-13)


def test_cancellation_raises():
    with pytest.raises(PrecisionLossError):
        entire.eval(EXP, -60.0)


@pytest.mark.parametrize("f,r,theta", [(EXP, 7.0, 0.0), (EXPM, 7.0, math.pi), (COSH, 5.0, 0.0)])
def test_max_modulus_location(f, r, theta):
    log_M, th = entire.max_modulus(f, r)
    assert log_M == pytest.approx(r if f is not COSH else math.log(math.cosh(r)), rel=1e-12)
    assert math.isclose(th, theta, abs_tol=1e-8)


def test_log_derivative_exp_both_routes():
    assert entire.log_derivative(EXP, 25.0, "finite_diff") == pytest.approx(25.0, rel=1e-8)
    assert entire.log_derivative(EXP, 25.0, "logd") == pytest.approx(25.0, rel=1e-12)
    assert entire.log_derivative(EXPM, 7.0, cross_check=True) == pytest.approx(7.0, rel=1e-10)


def test_log_derivative_cosh_and_monomial():
    assert entire.log_derivative(COSH, 5.0) == pytest.approx(5 * math.tanh(5), rel=1e-12)
    assert entire.log_derivative(entire.monomial(7), 3.0, "finite_diff") == pytest.approx(7.0, rel=1e-8)


def test_log_derivative_bad_method():
    with pytest.raises(ValueError):
        entire.log_derivative(EXP, 2.0, "spline")


def test_series_registry():
    assert entire.get_series("monomial{5}").name.startswith("monomial")
    assert entire.get_series("lacunary{3}") is not None
    with pytest.raises((KeyError, ValueError)):
        entire.get_series("sinc")


def test_profile_exp_is_clean_and_shaped():
    grid = np.geomspace(math.e ** 2, math.e ** 10, 24)
    prof = entire.profile(EXP, grid)
    assert all(row.ok for row in prof.rows)
    assert prof.nu_nondecreasing() and prof.a_fd_nondecreasing() and prof.logM_convex()
    np.testing.assert_allclose(prof.column("log_M"), grid, rtol=1e-12)
    lines = prof.to_csv().splitlines()
    assert lines[0] == ",".join(entire.PROFILE_COLUMNS) and len(lines) == 25


def test_alogM_scan_empty_for_exp():
    prof = entire.profile(EXP, np.geomspace(math.e ** 2, math.e ** 10, 16))
    rep = entire.alogM_scan(prof, entire.DEFAULT_PSI)
    assert rep.intervals == [] and rep.total_measure == 0.0


@given(st.floats(1.0, 200.0), st.floats(1.0001, 1.5))
def test_central_index_monotone_in_r(r, factor):
    assert entire.max_term(EXP, r)[1] <= entire.max_term(EXP, r * factor)[1]


@given(st.floats(0.5, 60.0))
def test_max_term_below_max_modulus(r):
    for f in (EXP, COSH, QUADEXP):
        assert entire.max_term(f, r)[0] <= entire.max_modulus(f, r)[0] + 1e-12
