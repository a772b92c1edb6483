"""Empirical checks of the flat-disk approximation and of the product's asymptotics.

Near a maximum-modulus point z_r an entire function should behave like a
power:  f(z) ~ (z / z_r)^a f(z_r)  on the disk |z - z_r| < r / sqrt(psi(a)),
with a = a(r, f).  ``verify_disk`` measures how far the quotient
f(z) (z_r / z)^a / f(z_r) strays from 1 on that disk; ``sweep`` repeats the
check over a geometric grid and measures the failing radii logarithmically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import counterexample as cx
from . import entire
from .borel import PreconditionError, flagged_intervals, measure
from .entire import LogComplex, PowerSeries
from .weights import Convergence, WeightFunction, regularity_bounds

DEFAULT_TOL = 0.05
MAX_EXCLUDED_FRACTION = 0.10
INNER_RING = 0.5


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _abs_expm1(x: float, y: float) -> float:
    """|e^{x + iy} - 1| without cancellation for small x, y."""
    re = math.expm1(x) * math.cos(y) - 2.0 * math.sin(0.5 * y) ** 2
    im = math.exp(x) * math.sin(y)
    return math.hypot(re, im)


def _wrap(p: float) -> float:
    return math.remainder(p, 2 * math.pi)


@dataclass
class DiskReport:
    r: float
    theta_star: float
    log_M: float
    a_used: float
    radius_tested: float
    n_samples: int
    max_deviation: float
    tol: float
    excluded_samples: int = 0
    deviations: Optional[np.ndarray] = None
    sample_angles: Optional[np.ndarray] = None
    flags: List[str] = field(default_factory=list)

    @property
    def z_r(self) -> complex:
        return self.r * complex(math.cos(self.theta_star), math.sin(self.theta_star))

    @property
    def verdict(self) -> bool:
        too_many = self.excluded_samples > MAX_EXCLUDED_FRACTION * self.n_samples
        return (not too_many) and math.isfinite(self.max_deviation) and self.max_deviation <= self.tol

    @property
    def exceptional_flag(self) -> bool:
        return not self.verdict


def _check_psi(psi: WeightFunction, a: float) -> List[str]:
    """Divergent weights are rejected; a log slope >= 2 near a is only flagged."""
    if psi.classification() is not Convergence.CONVERGENT:
        raise PreconditionError(f"{psi.label()} is divergent; the disk statement needs a convergent weight")
    t = max(a, psi.t0)
    _, L = regularity_bounds(psi, t, 4.0 * t, 16)
    return [f"log_slope_{L:.4g}_ge_2"] if L > 2.0 + 1e-12 else []


def verify_disk(f: PowerSeries, r: float, psi: WeightFunction = entire.DEFAULT_PSI,
                n_samples: int = 64, tol: float = DEFAULT_TOL,
                angular_budget: int = 64, jitter: float = 0.0,
                seed: Optional[int] = None) -> DiskReport:
    """Deviation of f(z)(z_r/z)^a / f(z_r) from 1 on the disk r/sqrt(psi(a)) around z_r.

    Samples are ``n_samples`` uniform angles on the disk boundary and as
    many on the circle of half the radius.  Everything is done in log-space;
    samples whose evaluation loses precision are excluded and counted.
    ``jitter`` > 0 perturbs the angles by up to that fraction of the sample
    spacing, drawn from a generator seeded with ``seed``.
    """
    if n_samples < 4:
        raise ValueError("n_samples must be >= 4")
    log_M, theta_star = entire.max_modulus(f, r, angular_budget)
    a = entire.log_derivative_logd(f, r, angular_budget)
    flags = _check_psi(psi, a)
    if a < psi.t0:
        flags.append("a_below_t0")
    radius = r / math.sqrt(psi(max(a, psi.t0)))
    f_zr = entire.eval(f, LogComplex(math.log(r), theta_star))

    phis = 2 * math.pi * np.arange(n_samples) / n_samples
    if jitter:
        rng = np.random.default_rng(seed)
        phis = phis + jitter * (2 * math.pi / n_samples) * rng.uniform(-0.5, 0.5, n_samples)
    angles, devs = [], []
    excluded = 0
    for ring in (1.0, INNER_RING):
        s = ring * radius / r
        for phi in phis:
            step = complex(math.cos(phi), math.sin(phi)) * s
            log_ratio = np.log1p(step)  # log(w / z_r), principal branch (|step| < 1)
            w = LogComplex(math.log(r) + log_ratio.real, theta_star + log_ratio.imag)
            try:
                fw = entire.eval(f, w)
            except ArithmeticError:
                excluded += 1
                devs.append(math.nan)
                angles.append(phi)
                continue
            dx = fw.log_mag - f_zr.log_mag - a * log_ratio.real
            dy = _wrap(fw.phase - f_zr.phase - a * log_ratio.imag)
            devs.append(_abs_expm1(dx, dy))
            angles.append(phi)
    devs_arr = np.array(devs)
    finite = devs_arr[np.isfinite(devs_arr)]
    max_dev = float(np.max(finite)) if finite.size else math.nan
    return DiskReport(
        r=float(r), theta_star=theta_star, log_M=log_M, a_used=a, radius_tested=radius,
        n_samples=2 * n_samples, max_deviation=max_dev, tol=tol, excluded_samples=excluded,
        deviations=devs_arr, sample_angles=np.array(angles), flags=flags,
    )


def exp_disk_deviation(r: float, delta: float) -> float:
    """|e^{z - r} (r/z)^r - 1| at z = r - delta, the left end of the disk for exp."""
    return math.expm1(-delta - r * math.log1p(-delta / r))


def exp_disk_deviation_right(r: float, delta: float) -> float:
    """e^{delta - r log(1 + delta/r)} - 1, the value at z = r + delta."""
    return math.expm1(delta - r * math.log1p(delta / r))


@dataclass
class SweepResult:
    reports: List[DiskReport]
    exceptional_log_measure: float
    intervals: list
    tol: float
    series: str
    psi: WeightFunction

    @property
    def all_pass(self) -> bool:
        return all(rep.verdict for rep in self.reports)

    def deviation_trend(self) -> float:
        """Fraction of consecutive grid steps along which the deviation decreases."""
        d = np.array([rep.max_deviation for rep in self.reports])
        if len(d) < 2:
            return 1.0
        return float(np.mean(np.diff(d) < 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "a", "radius", "max_deviation", "verdict", "excluded_samples"])
        for rep in self.reports:
            w.writerow([_fmt(rep.r), _fmt(rep.a_used), _fmt(rep.radius_tested),
                        _fmt(rep.max_deviation), "pass" if rep.verdict else "fail",
                        rep.excluded_samples])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "series": self.series,
            "psi": self.psi.to_dict(),
            "tol": self.tol,
            "n_rows": len(self.reports),
            "n_fail": sum(not rep.verdict for rep in self.reports),
            "exceptional_log_measure": self.exceptional_log_measure,
            "intervals": [[lo, hi] for lo, hi in self.intervals],
            "deviation_trend": self.deviation_trend(),
            "note": "tolerance at fixed r is a convention; the approximation is asymptotic",
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def sweep_from_reports(reports: List[DiskReport], tol: float, series: str,
                       psi: WeightFunction) -> SweepResult:
    """Measure the failing cells of reports ordered by increasing r, in log r."""
    if len(reports) > 1:
        xs = np.log([rep.r for rep in reports])
        iv = flagged_intervals(xs, [not rep.verdict for rep in reports])
    else:
        iv = []
    return SweepResult(list(reports), measure(iv), iv, tol, series, psi)


def sweep(f: PowerSeries, psi: WeightFunction, r_lo: float, r_hi: float, pts: int,
          tol: float = DEFAULT_TOL, n_samples: int = 64, jitter: float = 0.0,
          seed: Optional[int] = None) -> SweepResult:
    """verify_disk on a geometric grid; failing cells are measured in log r."""
    if pts <= 0:
        return SweepResult([], 0.0, [], tol, f.name, psi)
    rs = np.geomspace(r_lo, r_hi, pts) if pts > 1 else np.array([float(r_lo)])
    reports = [verify_disk(f, float(r), psi, n_samples, tol, jitter=jitter, seed=seed) for r in rs]
    return sweep_from_reports(reports, tol, f.name, psi)


# -- asymptotics of the product ----------------------------------------------


ASYMPTOTICS_COLUMNS = ("r", "A0", "A1", "lower_over_A0", "upper_over_A0", "lower_floor",
                       "a_num_over_A1", "a_exact_over_A1")


@dataclass
class AsymptoticsTable:
    rows: List[dict]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def drift_toward_one(self, name: str) -> bool:
        """|ratio - 1| at the last grid r is below its value a decade earlier (or at the start)."""
        r = self.column("r")
        v = np.abs(self.column(name) - 1.0)
        i0 = int(np.searchsorted(r, r[-1] / 10.0))
        return bool(v[-1] < v[i0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ASYMPTOTICS_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in ASYMPTOTICS_COLUMNS])
        return buf.getvalue()


def check_asymptotics(pf: cx.ProductFunction, r_grid: Optional[Sequence[float]] = None,
                      n: int = 32) -> AsymptoticsTable:
    """Ratios of the log M bounds to A0 and of a numerical a(r) to A1.

    ``a_num`` is the central difference in log r of the midpoint of the two
    bounds, with step one circle spacing 1/sqrt(A2(r)).
    """
    sc = pf.scales
    if r_grid is None:
        lo = max(float(pf.radii[1]), 1.0 + 1e-9)
        hi = pf.r_max_valid * math.exp(-2.0 / math.sqrt(sc.eval("A2", pf.r_max_valid)))
        r_grid = np.geomspace(lo, hi, n)
    rows = []
    for r in r_grid:
        r = float(r)
        A0, A1 = sc.eval("A0", r), sc.eval("A1", r)
        eps = 1.0 / math.sqrt(sc.eval("A2", r))

        def mid(rr: float) -> float:
            b = cx.logM_bounds(pf, rr)
            return 0.5 * (b.lower + b.upper)

        b = cx.logM_bounds(pf, r)
        a_num = (mid(r * math.exp(eps)) - mid(r * math.exp(-eps))) / (2 * eps)
        sumF = cx.counting_sum_check(sc, r)
        rows.append({
            "r": r, "A0": A0, "A1": A1,
            "lower": b.lower, "upper": b.upper,
            "lower_over_A0": b.lower / A0, "upper_over_A0": b.upper / A0,
            "lower_floor": 1.0 - (sc.psi.t0 * math.log(r) + sumF.bound) / A0,
            "a_num_over_A1": a_num / A1,
            "a_exact_over_A1": cx.log_derivative(pf, r) / A1,
        })
    return AsymptoticsTable(rows)


def zero_certificates(pf: cx.ProductFunction, r: float, n_theta: int = 1024) -> List[dict]:
    """Nearest-zero distance on |z| = r against the bound 9 r / sqrt(A2(r))."""
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    dist = cx.zero_distances(pf, r, thetas)
    bound = 9.0 * r / math.sqrt(pf.scales.eval("A2", r))
    return [{"theta": float(t), "distance": float(d), "bound_9r_over_sqrtA2": bound, "pass": bool(d <= bound)}
            for t, d in zip(thetas, dist)]


def disk_scale_check(pf: cx.ProductFunction, r: float) -> dict:
    """d_max(r) against 9r/sqrt(A2(r)) and against 9r/sqrt(psi(a(r)/2))."""
    d = cx.d_max(pf, r)
    a = cx.log_derivative(pf, r)
    psi = pf.scales.psi
    by_a = 9.0 * r / math.sqrt(psi(a / 2)) if a / 2 >= psi.t0 else math.nan
    return {"r": r, "d_max": d, "a": a,
            "bound_A2": 9.0 * r / math.sqrt(pf.scales.eval("A2", r)), "bound_psi_a": by_a}
