import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from wvdisks import counterexample as cx
from wvdisks import scales
from wvdisks.scales import RangeError
from wvdisks.weights import WeightFunction


def _direct_log_abs(pf, z):
    """log|f(z)| over all generated circles in plain complex arithmetic (small r only)."""
    return float(sum(np.log(np.abs(1 + (z / h) ** int(m))) for h, m in zip(pf.radii, pf.m)))


# -- construction -------------------------------------------------------------


def test_circle_invariants(product, tlogt_scales):
    assert np.all(np.diff(product.radii) > 0)
    assert product.m[0] >= 1 and np.all(np.diff(product.m) >= 0)
    expected = np.floor(np.sqrt(tlogt_scales.eval("A2", product.radii)) + 1e-9).astype(int)
    np.testing.assert_array_equal(product.m, expected)
    assert product.radii[0] == pytest.approx(tlogt_scales.eval_h(1.0))


def test_valid_range_and_summary(product):
    assert product.r_max_valid == pytest.approx(3.0)
    s = product.summary()
    assert s["k_max"] == product.k_max and s["first_multiplicity"] == int(product.m[0])
    assert product.tail_bound_after(product.r_max_valid, product.k_max) < 1e-9


def test_hypotheses_are_enforced():
    with pytest.raises(cx.HypothesisError):
        cx.construct(scales.build(WeightFunction(1, 2.0, math.e), 2.0), 1.5)
    with pytest.raises(cx.HypothesisError):
        cx.construct(scales.build(WeightFunction(1, 1.0, math.exp(3)), 2.0), 1.5)


def test_table_must_cover_rmax(tlogt_scales):
    with pytest.raises(RangeError):
        cx.construct(tlogt_scales, 10.0)


def test_short_table_limits_valid_range(tlogt_scales):
    pf = cx.construct(tlogt_scales, 3.6)
    assert pf.r_max_valid < 3.6 and pf.notes


# -- evaluation ---------------------------------------------------------------


def test_log_abs_nonnegative_inside_first_circle(product):
    val, err = cx.eval_log_abs(product, product.radii[0] / 2, 0.0)
    assert val >= 0 and err < 1e-12


def test_log_abs_at_zero_is_minus_inf(product):
    k = 40
    val, _ = cx.eval_log_abs(product, product.radii[k], math.pi * 3 / product.m[k])
    assert val == -math.inf


def test_matches_direct_product(toy_product):
    pf = toy_product
    for r in (0.9, 1.1, pf.r_max_valid):
        for th in (0.0, 0.3, 2.0, math.pi):
            z = r * complex(math.cos(th), math.sin(th))
            val, _ = cx.eval_log_abs(pf, r, th)
            assert val == pytest.approx(_direct_log_abs(pf, z), rel=1e-11, abs=1e-11)


@pytest.mark.parametrize("r", [1.02, 1.4, 2.0, 2.5, 2.7])
def test_tail_error_is_certified(product, r):
    K, tail = cx._cut(product, r)
    assert K + 50 <= product.k_max
    b = product.m[K:K + 50] * (math.log(r) - product.log_h[K:K + 50])
    assert math.fsum(np.logaddexp(0.0, b)) <= tail
    rho = product.scales.rho(r)
    assert tail <= 2 * rho / math.log(rho) + rho


def test_range_error_beyond_valid(product):
    with pytest.raises(RangeError):
        cx.eval_log_abs(product, 3.2, 0.0)


# -- log M bounds ---------------------------------------------------------------


@pytest.mark.parametrize("r", np.linspace(1.01, 3.0, 12))
def test_logM_bounds(product, tlogt_scales, r):
    b = cx.logM_bounds(product, r)
    assert b.lower <= b.upper
    assert b.S2 <= tlogt_scales.eval("g", min(b.rho * r, tlogt_scales.r_max)) * math.log(2)
    # the upper sum is log f(r) itself (nonnegative coefficients)
    assert b.upper == pytest.approx(cx.eval_log_abs(product, r, 0.0)[0], rel=1e-13)
    floor = tlogt_scales.eval("A0", r) - tlogt_scales.psi.t0 * math.log(r) - cx.counting_sum_check(tlogt_scales, r).bound
    assert b.lower >= floor


def test_exact_log_derivative_matches_difference(product):
    r, eps = 2.2, 1e-6
    fd = (cx.logM_upper(product, r * math.exp(eps)) - cx.logM_upper(product, r * math.exp(-eps))) / (2 * eps)
    assert cx.log_derivative(product, r) == pytest.approx(fd, rel=1e-6)


# -- sums versus integrals ------------------------------------------------------


def test_sum_vs_integral_linear():
    res = cx.sum_vs_integral(lambda t: t, 10.0, sup_dF=1.0)
    assert (res.sum, res.bound) == (55.0, 10.0)
    assert res.integral == pytest.approx(50.0)
    assert res.holds


def test_sum_vs_integral_constant():
    res = cx.sum_vs_integral(lambda t: 2.5, 7.4, dF=lambda t: 0.0)
    assert res.sum == pytest.approx(7 * 2.5) and res.integral == pytest.approx(7 * 2.5)
    assert res.bound == 0.0 and res.holds


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
def test_counting_integral_identity(tlogt_scales, r):
    # int_0^{g(r)} (h/h')(t) log(r/h(t)) dt = A0(r) - t0 log r
    F = cx.counting_integrand(tlogt_scales, r)
    R = tlogt_scales.eval("g", r)
    val = integrate.quad(F, 0.0, R, limit=400, epsrel=1e-11)[0]
    assert val == pytest.approx(tlogt_scales.eval("A0", r) - tlogt_scales.psi.t0 * math.log(r), rel=1e-7)
    assert cx.counting_sum_check(tlogt_scales, r).holds


# -- zeros ----------------------------------------------------------------------


def test_nearest_zero_examples(product):
    k = 7
    zero = product.radii[k] * complex(math.cos(math.pi / product.m[k]), math.sin(math.pi / product.m[k]))
    d, z0 = cx.nearest_zero(product, zero)
    assert d == pytest.approx(0.0, abs=1e-14) and z0 == pytest.approx(zero)
    d0, _ = cx.nearest_zero(product, 0j)
    assert d0 == pytest.approx(product.radii[0])


def test_nearest_zero_midway_on_own_circle(product):
    k = 3
    h, m = product.radii[k], int(product.m[k])
    z = h * complex(math.cos(2 * math.pi / m), math.sin(2 * math.pi / m))  # between zeros j=0 and j=1
    chord = 2 * h * math.sin(math.pi / (2 * m))
    zeros = np.concatenate([product.radii[j] * np.exp(1j * math.pi * (2 * np.arange(product.m[j]) + 1) / product.m[j])
                            for j in (k - 1, k, k + 1)])
    brute = float(np.min(np.abs(zeros - z)))
    d, _ = cx.nearest_zero(product, z)
    assert d == pytest.approx(brute, rel=1e-12)
    assert d <= chord + 1e-15


@given(st.floats(0.0, 1.0), st.floats(-math.pi, math.pi))
def test_nearest_zero_brute_force_toy(toy_product, s, th):
    pf = toy_product
    z = s * pf.r_max_valid * complex(math.cos(th), math.sin(th))
    zeros = np.concatenate([h * np.exp(1j * math.pi * (2 * np.arange(m) + 1) / m) for h, m in zip(pf.radii, pf.m)])
    d, z0 = cx.nearest_zero(pf, z)
    assert d == pytest.approx(float(np.min(np.abs(zeros - z))), abs=1e-13)
    assert abs(z - z0) == pytest.approx(d, abs=1e-13)


def test_zero_distances_agree_with_nearest_zero(product):
    r = 2.3
    th = np.linspace(-3, 3, 17)
    d = cx.zero_distances(product, r, th)
    for t, v in zip(th, d):
        assert v == pytest.approx(cx.nearest_zero(product, r * complex(math.cos(t), math.sin(t)))[0], rel=1e-12)


@pytest.mark.parametrize("n", [5, 100, 600])
def test_d_max_on_a_zero_circle(product, n):
    h, m = product.radii[n - 1], product.m[n - 1]
    assert cx.d_max(product, h) <= 2 * h * math.sin(math.pi / (2 * m)) * (1 + 1e-12)


@pytest.mark.parametrize("r", np.linspace(1.5, 3.0, 7))
def test_d_max_bounds(product, tlogt_scales, r):
    d = cx.d_max(product, r)
    n = int(math.floor(tlogt_scales.eval("g", r)))
    hn, hn1 = tlogt_scales.eval_h(n), tlogt_scales.eval_h(n + 1)
    assert d <= hn1 - hn + 7 * tlogt_scales.eval_h_prime(n)
    assert d <= 9 * r / math.sqrt(tlogt_scales.eval("A2", r))


@pytest.mark.parametrize("r", [2.4, 2.7, 3.0])
def test_zero_distance_within_flat_disk_scale(product, r):
    a = cx.log_derivative(product, r)
    psi = product.scales.psi
    assert a / 2 >= psi.t0
    d = cx.zero_distances(product, r, 2 * math.pi * np.arange(2048) / 2048)
    assert np.max(d) <= 9 * r / math.sqrt(psi(a / 2))


def test_d_max_requires_r_beyond_first_circle(product):
    with pytest.raises(RangeError):
        cx.d_max(product, 1.0)


# -- minimum modulus ------------------------------------------------------------


def test_min_modulus_rigorous_bound_holds_and_grows(product):
    n_max = cx.feasible_n_max(product)
    reps = [cx.min_modulus_at_rn(product, n, n_theta=1024) for n in (10, 50, 200, n_max)]
    for rep in reps:
        assert rep.sampled_min >= rep.bound_rigorous - 1e-9 * abs(rep.bound_rigorous)
        assert rep.one_tract
    assert all(np.diff([rep.bound for rep in reps]) > 0)


def test_printed_min_modulus_bound_is_second_order_optimistic(product):
    rep = cx.min_modulus_at_rn(product, 500, n_theta=1024)
    # the two bounds differ by -sum log(1 - b_k^2) over k > n, a bounded amount
    gap = rep.bound - rep.bound_rigorous
    assert 0 < gap < 2.0
    assert rep.sampled_min >= rep.bound - gap - 1e-9 * abs(rep.bound)
