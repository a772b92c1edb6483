"""Tabulated growth scales A0, A1, A2, A3, g and the inverse h = g^{-1}.

A1 is defined implicitly by log r = int_{t0}^{A1(r)} du/psi(u).  Writing
x = log r this is the initial value problem dA1/dx = psi(A1), A1(0) = t0,
which is integrated once over the whole grid.  Then

    A2 = dA1/dx = psi(A1),   A3 = dA2/dx = psi'(A1) A2,
    A0 = int_0^x A1 dx,      g  = int_0^x sqrt(A2) dx,

and h is the inverse of g.  Tables are stored against x = log r and
interpolated with cubic Hermite pieces whose node slopes are the exact
derivatives above.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np
from scipy import integrate, interpolate

from .weights import WeightFunction, regularity_bounds

LOG_OVERFLOW_GUARD = 700.0
INVARIANT_SLACK = 1e-9
ROUNDTRIP_TOL = 1e-8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


class BuildError(RuntimeError):
    """The tables could not be built or failed a structural invariant."""


class RangeError(ValueError):
    """Query outside the tabulated range."""


def _neumaier_cumsum(parts: np.ndarray) -> np.ndarray:
    out = np.empty(len(parts) + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i, v in enumerate(parts):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i + 1] = s + c
    return out


def _monotone_hermite(x: np.ndarray, y: np.ndarray, dydx: np.ndarray, d2ydx2: np.ndarray | None = None):
    """Hermite interpolant using the exact node derivatives.

    With second derivatives a quintic piece per cell is used, provided its
    derivative stays positive on a 4-point-per-cell check; otherwise a cubic
    with the exact slopes when they satisfy the Fritsch-Carlson condition, and
    PCHIP as the last resort.
    """
    if d2ydx2 is not None:
        quintic = interpolate.BPoly.from_derivatives(
            x, np.column_stack([y, dydx, d2ydx2]), orders=5, extrapolate=False)
        probe = (x[:-1, None] + np.diff(x)[:, None] * np.linspace(0, 1, 5)[None, :]).ravel()
        if np.all(quintic.derivative()(probe) > 0):
            return quintic
    secant = np.diff(y) / np.diff(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = dydx[:-1] / secant
        b = dydx[1:] / secant
    ok = np.all(secant > 0) and np.all(np.isfinite(a)) and np.all(a * a + b * b <= 9.0)
    if ok:
        return interpolate.CubicHermiteSpline(x, y, dydx, extrapolate=False)
    return interpolate.PchipInterpolator(x, y, extrapolate=False)


@dataclass
class GrowthScales:
    """Immutable-by-convention table of the growth scales for one psi."""

    psi: WeightFunction
    x: np.ndarray
    log_A1: np.ndarray
    A0: np.ndarray
    g: np.ndarray
    K: float
    L: float
    tolerances: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.r = np.exp(self.x)
        self.A1 = np.exp(self.log_A1)
        self.log_A2 = self.psi.log_eval_array(self.A1)
        self.A2 = np.exp(self.log_A2)
        self.A3 = self.A2 * self.psi.log_slope_array(self.A1) * self.A2 / self.A1
        self.sqrt_A2 = np.exp(0.5 * self.log_A2)
        # derivatives in x = log r: (log A1)' = A2/A1, (log A1)'' = (A3 A1 - A2^2)/A1^2,
        # A0' = A1, A0'' = A2, g' = sqrt(A2), g'' = A3 / (2 sqrt(A2)),
        # and for the inverse x(g): x' = 1/g', x'' = -g''/g'^3
        q = self.A2 / self.A1
        g2 = 0.5 * self.A3 / self.sqrt_A2
        self._logA1_of_x = _monotone_hermite(self.x, self.log_A1, q, self.A3 / self.A1 - q * q)
        self._A0_of_x = _monotone_hermite(self.x, self.A0, self.A1, self.A2)
        self._g_of_x = _monotone_hermite(self.x, self.g, self.sqrt_A2, g2)
        self._x_of_g = _monotone_hermite(self.g, self.x, 1.0 / self.sqrt_A2, -g2 / self.sqrt_A2 ** 3)

    # -- bookkeeping ----------------------------------------------------

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def g_max(self) -> float:
        return float(self.g[-1])

    @property
    def c(self) -> float:
        """Constant with t <= psi(t) <= c t^L on [t0, inf)."""
        t0 = self.psi.t0
        return self.psi(t0) * t0 ** (-self.L)

    def _x_of_r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 1 - 1e-14) or np.any(r > self.r_max * (1 + 1e-14)):
            raise RangeError(f"r outside tabulated range [1, {self.r_max!r}]")
        return np.clip(np.log(np.maximum(r, 1.0)), 0.0, self.x[-1])

    # -- scale evaluation -----------------------------------------------

    def log_A1_at(self, r):
        return self._logA1_of_x(self._x_of_r(r))

    def eval(self, which: str, r):
        """Value of A0, A1, A2, A3 or g at r (scalar or array)."""
        which = which.upper() if which != "g" else "g"
        if which == "A1":
            out = np.exp(self.log_A1_at(r))
        elif which == "A2":
            out = np.exp(self.psi.log_eval_array(np.exp(self.log_A1_at(r))))
        elif which == "A3":
            a1 = np.exp(self.log_A1_at(r))
            a2 = np.exp(self.psi.log_eval_array(a1))
            out = a2 * self.psi.log_slope_array(a1) * a2 / a1
        elif which == "A0":
            out = self._A0_of_x(self._x_of_r(r))
        elif which == "g":
            out = self._g_of_x(self._x_of_r(r))
        else:
            raise ValueError(f"unknown scale {which!r}")
        return float(out) if np.ndim(out) == 0 else out

    def log_A2_at(self, r):
        return self.psi.log_eval_array(np.exp(self.log_A1_at(r)))

    def _x_of_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.g_max * (1 + 1e-14)):
            raise RangeError(f"t outside [0, {self.g_max!r}]")
        return self._x_of_g(np.clip(t, 0.0, self.g_max))

    def log_h(self, t):
        out = self._x_of_t(t)
        return float(out) if np.ndim(out) == 0 else out

    def eval_h(self, t):
        out = np.exp(self._x_of_t(t))
        return float(out) if np.ndim(out) == 0 else out

    def eval_h_prime(self, t):
        """h'(t) = h(t) / sqrt(A2(h(t)))."""
        x = self._x_of_t(t)
        log_a2 = self.psi.log_eval_array(np.exp(self._logA1_of_x(x)))
        out = np.exp(x - 0.5 * log_a2)
        return float(out) if np.ndim(out) == 0 else out

    def rho(self, r: float) -> float:
        """1 + A1(r) / (2 A2(r)); lies in (1, 3/2]."""
        return 1.0 + 0.5 * self.eval("A1", r) / self.eval("A2", r)

    def kappa1_ratio(self, r: float) -> float:
        """A2(rho r) / A2(r), bounded by 5/2."""
        return math.exp(self.log_A2_at(self.rho(r) * r) - self.log_A2_at(r))

    # -- invariant checks -----------------------------------------------

    def invariant_report(self) -> Dict[str, float]:
        """Worst slack of each structural inequality over the grid (>= 0 means holds)."""
        rel = lambda a, b: np.min((a - b) / np.abs(b))  # noqa: E731
        london = self.A1 * self.A3 / self.A2 ** 2
        london1 = self.A0 * self.A2 / self.A1 ** 2
        hg = np.exp(self._x_of_g(self.g))
        rep = {
            "A3>=A2": rel(self.A3, self.A2),
            "A2>=A1": rel(self.A2, self.A1),
            "A1>=r": rel(self.A1, self.r),
            "r>=1": float(np.min(self.r - 1.0)),
            "london_lower": float(np.min(london - 1.0)),
            "london_upper": float(np.min(self.L - london)),
            "A1_increasing": float(np.min(np.diff(self.A1))),
            "A2_increasing": float(np.min(np.diff(self.A2))),
            "g_increasing": float(np.min(np.diff(self.g))),
            "h_roundtrip": float(ROUNDTRIP_TOL - np.max(np.abs(hg / self.r - 1.0))),
        }
        if self.L < 2:
            rep["london1"] = float(np.min(1.0 / (2.0 - self.L) - london1))
        return rep

    def verify(self, slack: float = INVARIANT_SLACK) -> None:
        bad = {k: v for k, v in self.invariant_report().items() if v < -slack}
        if bad:
            raise BuildError(f"scale invariants violated: {bad}")

    # -- export ---------------------------------------------------------

    def rows(self) -> Iterable[tuple]:
        return zip(self.r, self.A0, self.A1, self.A2, self.A3, self.g)

    def to_csv(self, stream: Optional[io.TextIOBase] = None) -> str:
        buf = stream if stream is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "A0", "A1", "A2", "A3", "g"])
        for row in self.rows():
            w.writerow([f"{float(v):.17g}" for v in row])
        return buf.getvalue() if stream is None else ""


def build(psi: WeightFunction, r_max: float, pts_per_decade: int = 256,
          rtol: float = 1e-13, verify: bool = True) -> GrowthScales:
    """Integrate dA1/dlog r = psi(A1) from A1(1) = t0 and tabulate every scale."""
    if not r_max > 1:
        raise BuildError(f"r_max must exceed 1, got {r_max!r}")
    if pts_per_decade < 2:
        raise BuildError("pts_per_decade must be >= 2")
    x_max = math.log(r_max)
    n = max(int(math.ceil(math.log10(r_max) * pts_per_decade)), 8) + 1
    x = np.linspace(0.0, x_max, n)

    def rhs(_x, y):
        # y = log A1; dy/dx = psi(A1) / A1
        if y[0] > LOG_OVERFLOW_GUARD:
            raise BuildError("A1 left the double-precision range")
        return [math.exp(psi.log_eval(math.exp(y[0])) - y[0])]

    try:
        sol = integrate.solve_ivp(
            rhs, (0.0, x_max), [math.log(psi.t0)], method="DOP853",
            t_eval=x, dense_output=True, rtol=rtol, atol=rtol,
        )
    except OverflowError as exc:
        raise BuildError(f"overflow while integrating A1: {exc}") from exc
    if not sol.success:
        raise BuildError(f"A1 integration failed: {sol.message}")
    log_A1 = sol.y[0]
    log_A2_end = psi.log_eval(math.exp(log_A1[-1]))
    if log_A2_end > LOG_OVERFLOW_GUARD:
        raise BuildError(f"log A2(r_max) = {log_A2_end:.1f} exceeds the overflow guard")

    # cumulative quadrature of A1 and sqrt(A2) in x over each grid cell
    lo, hi = x[:-1], x[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo + half)[:, None] + half[:, None] * _GL_NODES[None, :]
    y_nodes = sol.sol(nodes.ravel())[0].reshape(nodes.shape)
    a1_nodes = np.exp(y_nodes)
    sqrt_a2_nodes = np.exp(0.5 * psi.log_eval_array(a1_nodes))
    A0 = _neumaier_cumsum(half * (a1_nodes @ _GL_WEIGHTS))
    g = _neumaier_cumsum(half * (sqrt_a2_nodes @ _GL_WEIGHTS))

    A1_end = math.exp(log_A1[-1])
    K, L = regularity_bounds(psi, psi.t0, max(A1_end, psi.t0 * (1 + 1e-9)), 512)
    scales = GrowthScales(
        psi=psi, x=x, log_A1=log_A1, A0=A0, g=g, K=K, L=L,
        tolerances={"rtol": rtol, "slack": INVARIANT_SLACK, "roundtrip": ROUNDTRIP_TOL},
    )
    if verify:
        scales.verify()
    return scales


def phi_inverse(psi: WeightFunction, log_r: float, tol: float = 1e-13) -> float:
    """A1(r) by bisection on phi(t) = int_{t0}^t du/psi; independent of the ODE path."""
    if log_r == 0:
        return psi.t0
    lo, hi = math.log(psi.t0), math.log(psi.t0) + 1.0
    while psi.integral_inverse(psi.t0, math.exp(hi))[0] < log_r:
        lo, hi = hi, 2 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if psi.integral_inverse(psi.t0, math.exp(mid))[0] < log_r:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))
