"""Borel-type exceptional sets for nondecreasing functions.

Two scans over sampled data:

* ``scan_lemma21``: where does T(x + 1/s1(T(x))) < T(x) + s2(T(x)) (and the
  mirrored lower inequality) fail?  The failing set has finite measure, and
  its size is bounded by 1/s1(t0) + (1/eta) I + 1 (upper part) plus
  1/s1(t0) + (1/delta) I + 1 (lower part), where I is the integral of
  dv / (s1(v) s2(v)) from t0 = T(x0).

* ``scan_lemma22``: for a convex Phi, where does the excess
  Phi(x+h) - Phi(x) - Phi'(x) h exceed eps for |h| <= 1/sqrt(psi(Phi'(x)))?

Measured sets are unions of sample cells: sample i owns the interval between
the midpoints to its neighbours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .weights import Convergence, DomainError, WeightFunction, regularity_bounds


class PreconditionError(ValueError):
    """Input violates a hypothesis of the scanned lemma."""


class ConvexityError(PreconditionError):
    pass


@dataclass(frozen=True)
class MonotoneSample:
    """Samples of a nondecreasing function on a strictly increasing grid."""

    xs: np.ndarray
    Ts: np.ndarray
    mode: str = "linear"

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=float)
        Ts = np.asarray(self.Ts, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "Ts", Ts)
        if xs.ndim != 1 or xs.shape != Ts.shape or len(xs) < 2:
            raise PreconditionError("xs and Ts must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise PreconditionError("xs must be strictly increasing")
        if np.any(np.diff(Ts) < 0):
            raise PreconditionError("Ts must be nondecreasing")
        if self.mode not in ("linear", "step"):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")

    @classmethod
    def from_function(cls, fn, lo: float, hi: float, n: int, mode: str = "linear") -> "MonotoneSample":
        xs = np.linspace(lo, hi, n)
        return cls(xs, np.array([fn(x) for x in xs]), mode)

    def __call__(self, x):
        if self.mode == "linear":
            return np.interp(x, self.xs, self.Ts)
        idx = np.searchsorted(self.xs, x, side="right") - 1
        return self.Ts[np.clip(idx, 0, len(self.xs) - 1)]

    @property
    def cell_width(self) -> float:
        return float(np.max(np.diff(self.xs)))


@dataclass
class ExceptionalSetReport:
    intervals: List[Tuple[float, float]]
    total_measure: float
    theoretical_bound: Optional[float] = None
    eta: Optional[float] = None
    delta_used: Optional[float] = None
    bound_is_lower_estimate: bool = False
    n_flagged: int = 0
    n_excluded: int = 0
    cell_width: float = 0.0
    notes: dict = field(default_factory=dict)

    def within_bound(self, cells: float = 1.0) -> bool:
        if self.theoretical_bound is None:
            return True
        return self.total_measure <= self.theoretical_bound + cells * self.cell_width

    def to_dict(self) -> dict:
        return {
            "intervals": [[float(a), float(b)] for a, b in self.intervals],
            "total_measure": float(self.total_measure),
            "theoretical_bound": None if self.theoretical_bound is None else float(self.theoretical_bound),
            "eta": None if self.eta is None else float(self.eta),
            "delta": None if self.delta_used is None else float(self.delta_used),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def flagged_intervals(xs: Sequence[float], flags: Sequence[bool]) -> List[Tuple[float, float]]:
    """Merge the cells of flagged samples into sorted disjoint intervals."""
    xs = np.asarray(xs, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    if len(xs) == 0 or not flags.any():
        return []
    mids = 0.5 * (xs[1:] + xs[:-1])
    left = np.concatenate([[xs[0]], mids])
    right = np.concatenate([mids, [xs[-1]]])
    out: List[Tuple[float, float]] = []
    for i in np.flatnonzero(flags):
        lo, hi = float(left[i]), float(right[i])
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def measure(intervals: Sequence[Tuple[float, float]]) -> float:
    return float(sum(b - a for a, b in intervals))


# -- sigma descriptors -----------------------------------------------------


@dataclass(frozen=True)
class Sigma:
    """coef * t^power * (log t + log_shift)^log_power * V(t)^v_exp * psi(t)^psi_exp.

    V is the tail integral of 1/psi.  Kept as data so scans are reproducible
    and serializable.
    """

    coef: float = 1.0
    power: float = 0.0
    log_power: float = 0.0
    log_shift: float = 0.0
    psi: Optional[WeightFunction] = None
    v_exp: float = 0.0
    psi_exp: float = 0.0

    def __call__(self, t: float) -> float:
        t = float(t)
        val = self.coef * t ** self.power
        if self.log_power:
            base = math.log(t) + self.log_shift
            if base <= 0:
                raise DomainError(f"log t + shift <= 0 at t={t!r}")
            val *= base ** self.log_power
        if self.psi is not None:
            if self.v_exp:
                val *= self.psi.tail_integral(t) ** self.v_exp
            if self.psi_exp:
                val *= self.psi(t) ** self.psi_exp
        return val

    def log_slope(self, t: float) -> float:
        """t sigma'(t) / sigma(t)."""
        t = float(t)
        s = self.power
        if self.log_power:
            s += self.log_power / (math.log(t) + self.log_shift)
        if self.psi is not None:
            if self.v_exp:
                s -= self.v_exp * t / (self.psi(t) * self.psi.tail_integral(t))
            if self.psi_exp:
                s += self.psi_exp * self.psi.log_slope(t)
        return s

    def to_dict(self) -> dict:
        d = {"coef": self.coef, "power": self.power, "log_power": self.log_power,
             "log_shift": self.log_shift, "v_exp": self.v_exp, "psi_exp": self.psi_exp}
        d["psi"] = None if self.psi is None else self.psi.to_dict()
        return d


def power_log(coef: float = 1.0, power: float = 0.0, log_power: float = 0.0, log_shift: float = 0.0) -> Sigma:
    return Sigma(coef=coef, power=power, log_power=log_power, log_shift=log_shift)


def sigma_pair_from_psi(psi: WeightFunction, K: float = 0.5) -> Tuple[Sigma, Sigma]:
    """sigma1 = sigma2 = V(t)^{K/2} sqrt(psi(t)) with V(t) = int_t^inf du/psi.

    ``K`` must lie in (0, 1) and below the lower regularity constant of psi;
    for the log-iterate family that constant is 1.
    """
    if psi.classification() is not Convergence.CONVERGENT:
        raise DomainError(f"{psi.label()} is divergent; V is undefined")
    if not 0 < K < 1:
        raise ValueError(f"K must lie in (0, 1), got {K!r}")
    s = Sigma(psi=psi, v_exp=K / 2, psi_exp=0.5)
    return s, s


def _integral_inv_product(s1: Sigma, s2: Sigma, t_lo: float, t_hi: float) -> float:
    if t_hi <= t_lo:
        return 0.0
    f = lambda u: math.exp(u) / (s1(math.exp(u)) * s2(math.exp(u)))  # noqa: E731
    val, _ = integrate.quad(f, math.log(t_lo), math.log(t_hi), epsabs=1e-12, epsrel=1e-10, limit=500)
    return val


def _check_sigma2(sigma2: Sigma, delta: float, t_lo: float, t_hi: float, n: int = 256) -> None:
    ts = np.geomspace(t_lo, t_hi, n) if t_hi > t_lo else np.array([t_lo])
    slopes = np.array([sigma2.log_slope(t) for t in ts])
    if np.any(slopes < -1e-12) or np.any(slopes > 1 - delta + 1e-12):
        raise PreconditionError(
            f"t s2'/s2 ranges over [{slopes.min():.6g}, {slopes.max():.6g}], "
            f"outside [0, {1 - delta:.6g}]"
        )


def G_values(sigma2: Sigma, ts) -> np.ndarray:
    """G(t) = t / sigma2(t)."""
    return np.array([t / sigma2(t) for t in np.atleast_1d(ts)])


def scan_lemma21(T: MonotoneSample, sigma1: Sigma, sigma2: Sigma, delta: float) -> ExceptionalSetReport:
    """Flag samples where the step bounds on T over 1/sigma1(T(x)) fail."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")
    xs, Ts = T.xs, T.Ts
    t0, t_max = float(Ts[0]), float(Ts[-1])
    if t0 <= 0:
        raise PreconditionError("T must be positive")
    _check_sigma2(sigma2, delta, t0, t_max)

    x_lo, x_hi = xs[0], xs[-1]
    flags = np.zeros(len(xs), dtype=bool)
    excluded = 0
    for i, (x, t) in enumerate(zip(xs, Ts)):
        step = 1.0 / sigma1(t)
        s2 = sigma2(t)
        usable = False
        if x + step <= x_hi:
            usable = True
            if not T(x + step) < t + s2:
                flags[i] = True
        if x - step >= x_lo:
            usable = True
            if not T(x - step) > t - s2:
                flags[i] = True
        if not usable:
            excluded += 1

    G0 = t0 / sigma2(t0)
    eta = delta * G0 * math.log1p(1.0 / G0)
    I = _integral_inv_product(sigma1, sigma2, t0, t_max)
    inv_s1 = 1.0 / sigma1(t0)
    bound = (inv_s1 + I / eta + 1.0) + (inv_s1 + I / delta + 1.0)
    iv = flagged_intervals(xs, flags)
    return ExceptionalSetReport(
        intervals=iv, total_measure=measure(iv), theoretical_bound=bound,
        eta=eta, delta_used=delta, bound_is_lower_estimate=True,
        n_flagged=int(flags.sum()), n_excluded=excluded, cell_width=T.cell_width,
        notes={"t0": t0, "t_max": t_max, "integral": I},
    )


def scan_lemma22(Phi: MonotoneSample, psi: WeightFunction, epsilon: float) -> ExceptionalSetReport:
    """Flag samples where the convex excess of Phi over |h| <= 1/sqrt(psi(Phi')) exceeds eps."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    xs, ys = Phi.xs, Phi.Ts
    slopes = np.diff(ys) / np.diff(xs)
    scale = max(1.0, float(np.max(np.abs(slopes))))
    if np.any(np.diff(slopes) < -1e-9 * scale):
        raise ConvexityError("Phi is not convex on the sample")
    phi_lin = MonotoneSample(xs, ys, "linear")

    flags = np.zeros(len(xs), dtype=bool)
    excluded = 0
    worst = 0.0
    for i in range(len(xs) - 1):
        d = slopes[i]  # right difference quotient
        if d < psi.t0:
            excluded += 1
            continue
        H = 1.0 / math.sqrt(psi(d))
        x = xs[i]
        if x - H < xs[0] or x + H > xs[-1]:
            excluded += 1
            continue
        base = ys[i]
        ex = max(phi_lin(x + H) - base - d * H, phi_lin(x - H) - base + d * H)
        worst = max(worst, ex)
        if ex > epsilon:
            flags[i] = True
    excluded += 1  # last sample has no right difference quotient

    # the spacing scan (scan_lemma21) with sigma1 = sigma2 = min(eps, 1) sqrt(psi) covers the flagged set
    bound = None
    eta = None
    delta = None
    valid = slopes[slopes >= psi.t0]
    if len(valid):
        if psi.classification() is not Convergence.CONVERGENT:
            raise PreconditionError(f"{psi.label()} is divergent")
        t0, t_max = float(valid[0]), float(valid[-1])
        K, L = regularity_bounds(psi, t0, max(t_max, t0 * (1 + 1e-9)), 128)
        if not (K > 0 and L < 2):
            raise PreconditionError(f"need K > 0 and L < 2 on [{t0:.6g}, {t_max:.6g}], got K={K:.6g}, L={L:.6g}")
        delta = 1.0 - L / 2.0
        sig = Sigma(coef=min(epsilon, 1.0), psi=psi, psi_exp=0.5)
        G0 = t0 / sig(t0)
        eta = delta * G0 * math.log1p(1.0 / G0)
        I = _integral_inv_product(sig, sig, t0, t_max)
        inv_s1 = 1.0 / sig(t0)
        bound = (inv_s1 + I / eta + 1.0) + (inv_s1 + I / delta + 1.0)
    iv = flagged_intervals(xs, flags)
    return ExceptionalSetReport(
        intervals=iv, total_measure=measure(iv), theoretical_bound=bound,
        eta=eta, delta_used=delta, bound_is_lower_estimate=bound is not None,
        n_flagged=int(flags.sum()), n_excluded=excluded, cell_width=Phi.cell_width,
        notes={"epsilon": epsilon, "worst_excess": worst},
    )
