import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wvdisks import _kernels_py, kernels

compiled = pytest.importorskip("wvdisks._ext._kernels", reason="compiled kernels not built")


def _circles(seed, n):
    rng = np.random.default_rng(seed)
    log_h = np.sort(rng.uniform(0.0, 1.5, n))
    m = np.sort(rng.integers(1, 5000, n)).astype(np.int64)
    return log_h, m


@given(st.integers(0, 10_000), st.integers(1, 200), st.floats(-0.5, 2.0))
def test_log_abs_sum_backends_agree(seed, n, log_r):
    log_h, m = _circles(seed, n)
    th = np.linspace(-7.0, 7.0, 33)
    a = _kernels_py.log_abs_sum(log_r, th, log_h, m)
    b = compiled.log_abs_sum(log_r, th, log_h, m)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 50), st.floats(0.5, 5.0))
def test_min_zero_distance_backends_agree(seed, n, r):
    log_h, m = _circles(seed, n)
    th = np.linspace(0.0, math.pi, 257)
    a = _kernels_py.min_zero_distance(r, th, np.exp(log_h), m)
    b = compiled.min_zero_distance(r, th, np.exp(log_h), m)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_single_factor_closed_form():
    # |1 + (z/h)^m| at z = r e^{i theta}
    for r, th, m in [(0.5, 0.3, 3), (2.0, 1.1, 7), (1.0, math.pi, 1), (1.7, 0.0, 40)]:
        exact = math.log(abs(1 + (r * complex(math.cos(th), math.sin(th))) ** m))
        for impl in (_kernels_py, compiled):
            got = impl.log_abs_sum(math.log(r), np.array([th]), np.array([0.0]), np.array([m], dtype=np.int64))[0]
            assert got == pytest.approx(exact, rel=1e-13, abs=1e-14)


def test_near_zero_keeps_relative_accuracy():
    # 1 + e^{i(pi + eps)} has modulus 2 sin(eps/2) ~ eps
    eps = 1e-9
    for impl in (_kernels_py, compiled):
        got = impl.log_abs_sum(0.0, np.array([math.pi + eps]), np.array([0.0]), np.array([1], dtype=np.int64))[0]
        assert got == pytest.approx(math.log(2 * math.sin(eps / 2)), rel=1e-6)


def test_selection_and_override():
    assert kernels.BACKEND == "cython"
    env = dict(os.environ, WVDISKS_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import wvdisks.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
