"""Pure numpy versions of the compiled kernels (same signatures and results).

Work is chunked over theta so memory stays O(chunk * n_circles).
"""

from __future__ import annotations

import math

import numpy as np

_CHUNK_ELEMS = 1 << 20
SATURATE = 39.2  # e^{-x} is below half an ulp of x beyond this
UNDERFLOW = 745.0


def _log_abs_one_plus(x: np.ndarray, half_phi: np.ndarray) -> np.ndarray:
    # log|1 + e^{x + i phi}| with phi = 2 half_phi; stable for huge |x| and near the zeros.
    # Only cos^2(phi/2) enters, so half_phi needs no range reduction.
    u = np.exp(-np.abs(x))
    c2 = np.cos(half_phi) ** 2
    t = u * (u + 2.0 * (2.0 * c2 - 1.0))
    small = np.abs(t) < 0.5
    with np.errstate(divide="ignore"):
        big = 0.5 * np.log((1.0 - u) ** 2 + 4.0 * u * c2)
    s = np.where(small, 0.5 * np.log1p(np.where(small, t, 0.0)), big)
    return np.where(x > 0, x + s, s)


def _rows(nt: int, nk: int):
    step = max(1, _CHUNK_ELEMS // max(nk, 1))
    for i in range(0, nt, step):
        yield slice(i, min(i + step, nt))


def log_abs_sum(log_r: float, thetas: np.ndarray, log_h: np.ndarray, m: np.ndarray) -> np.ndarray:
    """sum_k log|1 + (r e^{i theta} / h_k)^{m_k}| for each theta."""
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    mf = np.asarray(m, dtype=np.float64)
    x = mf * (log_r - np.asarray(log_h, dtype=np.float64))
    live = (x <= SATURATE) & (x >= -UNDERFLOW)
    base = math.fsum(x[x > SATURATE])
    x, mf = x[live], mf[live]
    out = np.empty(len(thetas))
    for sl in _rows(len(thetas), len(mf)):
        terms = _log_abs_one_plus(x[None, :], 0.5 * thetas[sl, None] * mf[None, :])
        out[sl] = base + np.sum(terms, axis=1)
    return out


def min_zero_distance(r: float, thetas: np.ndarray, radii: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Distance from r e^{i theta} to the nearest zero h_k e^{i pi (2j+1)/m_k}."""
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    mf = np.asarray(m, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    out = np.empty(len(thetas))
    for sl in _rows(len(thetas), len(mf)):
        th = thetas[sl, None]
        q = th * mf[None, :] / (2.0 * math.pi) - 0.5
        phi = 2.0 * math.pi * (np.floor(q + 0.5) + 0.5) / mf[None, :]
        s = np.sin(0.5 * (th - phi))
        d2 = (r - radii[None, :]) ** 2 + 4.0 * r * radii[None, :] * s * s
        out[sl] = np.sqrt(np.min(d2, axis=1))
    return out
