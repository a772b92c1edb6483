"""Backend selection for the hot loops of the zero-circle product.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``WVDISKS_PURE`` is set to a non-empty value other
than ``0``) the numpy implementation is used.  Both expose

    log_abs_sum(log_r, thetas, log_h, m) -> ndarray
    min_zero_distance(r, thetas, radii, m) -> ndarray
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("WVDISKS_PURE", "") in ("", "0"):
    try:
        from ._ext import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"
_impl = _compiled if _compiled is not None else _kernels_py


def _prep(thetas, a, m):
    return (
        np.ascontiguousarray(np.atleast_1d(thetas), dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(m, dtype=np.int64),
    )


def log_abs_sum(log_r: float, thetas, log_h, m) -> np.ndarray:
    th, lh, mm = _prep(thetas, log_h, m)
    return _impl.log_abs_sum(float(log_r), th, lh, mm)


def min_zero_distance(r: float, thetas, radii, m) -> np.ndarray:
    th, rr, mm = _prep(thetas, radii, m)
    return _impl.min_zero_distance(float(r), th, rr, mm)
