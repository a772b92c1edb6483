"""Entire functions given by power-series coefficients, evaluated in log-space.

Values of f are far outside the double range on the radii of interest, so
every quantity is carried as a log-magnitude plus a phase.  A sum of terms is
evaluated by factoring out the maximum term mu(r) = |a_nu| r^nu and summing
the normalised addends, whose moduli are at most 1.
"""

from __future__ import annotations

import bisect
import cmath
import csv
import io
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .borel import ExceptionalSetReport, flagged_intervals, measure
from .weights import Convergence, WeightFunction

TRUNCATION_MARGIN = 50.0
NEGLIGIBLE = 80.0  # terms this many log-units below the maximum are dropped from sums
FD_STEP_CAP = 0.05
WINDOW_PAD = 16
HARD_CAP = 10_000_000
CANCELLATION_RATIO = 1e-13
TIE_RTOL = 1e-12
ANGLE_TOL = 1e-10
CHUNK = 256

DEFAULT_PSI = WeightFunction(m=1, alpha=2.0, t0=math.e)


class ScanLimitError(RuntimeError):
    """Coefficient scan did not terminate below the hard cap."""


class PrecisionLossError(ArithmeticError):
    """Catastrophic cancellation while summing a series."""


class DisagreementError(ArithmeticError):
    """Finite-difference and logarithmic-derivative values of a(r) disagree."""


class BudgetError(ValueError):
    pass


# -- log-space complex numbers --------------------------------------------


def _norm_phase(p: float) -> float:
    p = math.remainder(p, 2 * math.pi)
    return math.pi if p <= -math.pi else p


@dataclass(frozen=True)
class LogComplex:
    """A complex number stored as (log |w|, arg w) with arg in (-pi, pi]."""

    log_mag: float
    phase: float = 0.0
    rel_err: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        if self.log_mag == -math.inf:
            object.__setattr__(self, "phase", 0.0)
        else:
            object.__setattr__(self, "phase", _norm_phase(float(self.phase)))

    @classmethod
    def from_complex(cls, w: complex) -> "LogComplex":
        if w == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(w)), cmath.phase(w))

    @classmethod
    def polar(cls, r: float, theta: float) -> "LogComplex":
        return cls(math.log(r) if r > 0 else -math.inf, theta)

    @property
    def is_zero(self) -> bool:
        return self.log_mag == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return cmath.rect(math.exp(self.log_mag), self.phase)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(self.log_mag + other.log_mag, self.phase + other.phase)

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(self.log_mag - other.log_mag, self.phase - other.phase)


def _as_logcomplex(z) -> LogComplex:
    if isinstance(z, LogComplex):
        return z
    if isinstance(z, tuple):
        return LogComplex.polar(*z)
    return LogComplex.from_complex(complex(z))


# -- power series ------------------------------------------------------------

CoeffFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class PowerSeries:
    """f(z) = sum a_n z^n with a deterministic, vectorised coefficient provider.

    ``coeff(ns)`` returns (log|a_n|, arg a_n) arrays, with -inf for a_n = 0.
    ``support`` yields the candidate indices in increasing order; the default
    is every n >= 0.
    """

    name: str
    coeff: CoeffFn
    known_positive: bool = False
    support: Optional[Callable[[], Iterator[int]]] = None

    def indices(self) -> Iterator[int]:
        return self.support() if self.support is not None else itertools.count()

    def log_coeff(self, n: int) -> LogComplex:
        la, ph = self.coeff(np.array([n]))
        return LogComplex(float(la[0]), float(ph[0]))

    def times_n(self) -> "PowerSeries":
        """z f'(z) = sum n a_n z^n."""
        base = self.coeff

        def coeff(ns):
            la, ph = base(ns)
            with np.errstate(divide="ignore"):
                return la + np.log(ns.astype(float)), ph

        return PowerSeries(f"z*d({self.name})", coeff, self.known_positive, self.support)


def _zero_phase(ns):
    return np.zeros(len(ns))


def _exp_coeff(ns):
    return -gammaln(ns + 1.0), _zero_phase(ns)


def _cosh_coeff(ns):
    la = np.where(ns % 2 == 0, -gammaln(ns + 1.0), -np.inf)
    return la, _zero_phase(ns)


def _expm_coeff(ns):
    return -gammaln(ns + 1.0), np.where(ns % 2 == 1, math.pi, 0.0)


def _quadexp_coeff(ns):
    la = np.where(ns % 2 == 0, -gammaln(ns // 2 + 1.0), -np.inf)
    return la, _zero_phase(ns)


def monomial(k: int) -> PowerSeries:
    if k < 0:
        raise ValueError("monomial degree must be >= 0")

    def coeff(ns):
        return np.where(ns == k, 0.0, -np.inf), _zero_phase(ns)

    return PowerSeries(f"monomial{{{k}}}", coeff, True, lambda: iter((k,)))


def lacunary(base: int) -> PowerSeries:
    if base < 2:
        raise ValueError("lacunary base must be >= 2")

    def coeff(ns):
        return -gammaln(ns + 1.0), _zero_phase(ns)

    return PowerSeries(f"lacunary{{{base}}}", coeff, True, lambda: (base ** j for j in itertools.count()))


def polynomial(coefficients: Sequence[complex], name: str = "poly") -> PowerSeries:
    """Finite series from explicit coefficients a_0, a_1, ..."""
    cs = [complex(c) for c in coefficients]
    logs = np.array([math.log(abs(c)) if c != 0 else -math.inf for c in cs])
    phases = np.array([cmath.phase(c) if c != 0 else 0.0 for c in cs])
    positive = all(c.imag == 0 and c.real >= 0 for c in cs)

    def coeff(ns):
        inside = ns < len(cs)
        idx = np.where(inside, ns, 0)
        return np.where(inside, logs[idx], -np.inf), np.where(inside, phases[idx], 0.0)

    return PowerSeries(name, coeff, positive, lambda: iter(range(len(cs))))


EXP = PowerSeries("exp", _exp_coeff, True)
COSH = PowerSeries("cosh", _cosh_coeff, True)
EXPM = PowerSeries("expm", _expm_coeff, False)
QUADEXP = PowerSeries("quadexp", _quadexp_coeff, True)

_REGISTRY = {"exp": EXP, "cosh": COSH, "expm": EXPM, "quadexp": QUADEXP}
_PARAM_RE = re.compile(r"^(monomial|lacunary)\s*\{?\s*(?:k=|base=)?(\d+)\s*\}?$")


def get_series(name: str) -> PowerSeries:
    """Look up a built-in series: exp, cosh, expm, quadexp, monomial{k}, lacunary{base}."""
    key = name.strip()
    if key in _REGISTRY:
        return _REGISTRY[key]
    m = _PARAM_RE.match(key)
    if m:
        kind, arg = m.group(1), int(m.group(2))
        return monomial(arg) if kind == "monomial" else lacunary(arg)
    raise KeyError(f"unknown series {name!r}")


def series_names() -> List[str]:
    return sorted(_REGISTRY) + ["monomial{k}", "lacunary{base}"]


# -- term scanning -------------------------------------------------------------


@dataclass(frozen=True)
class TermScan:
    ns: np.ndarray
    log_terms: np.ndarray  # log|a_n| + n log r
    phases: np.ndarray  # arg a_n
    log_mu: float
    nu: int
    tail_rel: float


def scan_terms(f: PowerSeries, log_r: float, margin: float = TRUNCATION_MARGIN,
               hard_cap: int = HARD_CAP) -> TermScan:
    """Collect terms until they stay `margin` log-units below the maximum.

    The run of small terms must span W = ceil(sqrt(nu)) + 16 consecutive
    indices n, which guards against gaps in lacunary series.  Ties for the maximum resolve to
    the larger index.
    """
    it = f.indices()
    ns_parts, lt_parts, ph_parts = [], [], []
    best = -math.inf
    nu = -1
    last_big = -1  # position (in scan order) of the last term within margin
    last_big_n = -1
    count = 0
    exhausted = False
    capped = False
    while True:
        pulled = list(itertools.islice(it, CHUNK))
        if pulled and pulled[-1] > hard_cap:  # indices increase
            capped = True
            pulled = pulled[:bisect.bisect_right(pulled, hard_cap)]
        chunk = np.array(pulled, dtype=np.int64)
        if not len(chunk):
            if capped:
                raise ScanLimitError(f"{f.name}: scan passed n={hard_cap} at log r={log_r!r}")
            exhausted = True
            break
        la, ph = f.coeff(chunk)
        lt = la + chunk * log_r
        cmax = float(np.max(lt))
        if cmax > -math.inf:
            if best == -math.inf or cmax > best + TIE_RTOL * max(1.0, abs(best)):
                best = cmax
            tol = TIE_RTOL * max(1.0, abs(best))
            tied = np.flatnonzero(lt >= best - tol)
            if len(tied):
                nu = int(chunk[tied[-1]])
            big = np.flatnonzero(lt >= best - margin)
            if len(big):
                last_big = count + int(big[-1])
                last_big_n = int(chunk[big[-1]])
        ns_parts.append(chunk)
        lt_parts.append(lt)
        ph_parts.append(ph)
        count += len(chunk)
        if best > -math.inf:
            window = math.ceil(math.sqrt(max(nu, 0))) + WINDOW_PAD
            if int(chunk[-1]) - last_big_n >= window:
                break
        if capped:
            raise ScanLimitError(f"{f.name}: scan passed n={hard_cap} at log r={log_r!r}")
    ns = np.concatenate(ns_parts) if ns_parts else np.zeros(0, dtype=np.int64)
    lts = np.concatenate(lt_parts) if lt_parts else np.zeros(0)
    phs = np.concatenate(ph_parts) if ph_parts else np.zeros(0)
    if best == -math.inf:
        return TermScan(ns, lts, phs, -math.inf, -1, 0.0)
    tail = 0.0
    if not exhausted:
        tail_terms = lts[last_big + 1:]
        tail = float(np.exp(np.max(tail_terms) - best)) if len(tail_terms) else 0.0
    return TermScan(ns, lts, phs, best, nu, tail)


def max_term(f: PowerSeries, r: float) -> Tuple[float, int]:
    """(log mu(r), nu(r)): log of the maximum term and the largest index attaining it."""
    if not r > 0:
        raise ValueError("r must be positive")
    s = scan_terms(f, math.log(r))
    return s.log_mu, s.nu


def eval(f: PowerSeries, z, r_hint: Optional[float] = None) -> LogComplex:  # noqa: A001
    """f(z) in log-space, with a relative error estimate in ``rel_err``.

    ``z`` may be a LogComplex, a complex number or an (r, theta) tuple.
    """
    zl = _as_logcomplex(z)
    if zl.is_zero:
        la, ph = f.coeff(np.array([0]))
        return LogComplex(float(la[0]), float(ph[0]))
    s = scan_terms(f, zl.log_mag)
    if s.log_mu == -math.inf:
        return LogComplex(-math.inf)
    # terms below exp(-NEGLIGIBLE) of the maximum cannot move a double-precision sum
    keep = s.log_terms > s.log_mu - NEGLIGIBLE
    dropped = len(s.log_terms) * math.exp(-NEGLIGIBLE)
    mags = np.exp(s.log_terms[keep] - s.log_mu)
    angles = s.phases[keep] + s.ns[keep] * zl.phase
    re_parts = mags * np.cos(angles)
    im_parts = mags * np.sin(angles)
    re_sum = math.fsum(re_parts)
    im_sum = math.fsum(im_parts)
    size = math.hypot(re_sum, im_sum)
    if size < CANCELLATION_RATIO * float(np.max(mags)):
        raise PrecisionLossError(
            f"{f.name}: |sum| = {size:.3e} after normalising by the maximum term at z={zl}"
        )
    # angle error ~ n * ulp(theta) per addend, plus the neglected tail
    phase_err = float(np.max(s.ns[keep])) * 2.3e-16 * max(1.0, abs(zl.phase))
    rel_err = (s.tail_rel + dropped + float(mags.sum()) * (1e-16 + phase_err)) / size
    return LogComplex(s.log_mu + math.log(size), math.atan2(im_sum, re_sum), rel_err)


def eval_log_abs(f: PowerSeries, z) -> float:
    return eval(f, z).log_mag


# -- maximum modulus and a(r) ---------------------------------------------


def _snap_angle(theta: float) -> float:
    theta = math.fmod(theta, 2 * math.pi)
    if theta < 0:
        theta += 2 * math.pi
    if theta < 1e-9 or 2 * math.pi - theta < 1e-9:
        return 0.0
    return theta


def _log_abs_or_neg_inf(f: PowerSeries, log_r: float, theta: float) -> float:
    try:
        return eval(f, LogComplex(log_r, theta)).log_mag
    except PrecisionLossError:
        return -math.inf


def max_modulus(f: PowerSeries, r: float, angular_budget: int = 64) -> Tuple[float, float]:
    """(log M(r), theta*) with |f(r e^{i theta*})| = M(r).

    Positive-coefficient series peak on the positive axis.  Otherwise a coarse
    scan of `angular_budget` angles is refined by bounded Brent search to
    1e-10 in angle; among equal maxima the smallest theta* >= 0 is kept.
    """
    if angular_budget < 8:
        raise BudgetError("angular_budget must be >= 8")
    if not r > 0:
        raise ValueError("r must be positive")
    log_r = math.log(r)
    if f.known_positive:
        return eval(f, LogComplex(log_r, 0.0)).log_mag, 0.0
    step = 2 * math.pi / angular_budget
    thetas = step * np.arange(angular_budget)
    vals = np.array([_log_abs_or_neg_inf(f, log_r, float(t)) for t in thetas])
    if np.all(vals == -math.inf):
        raise PrecisionLossError(f"{f.name}: every sample on |z|={r} lost precision")
    n = angular_budget
    peaks = [j for j in range(n)
             if vals[j] > -math.inf and vals[j] >= vals[j - 1] and vals[j] >= vals[(j + 1) % n]]
    peaks.sort(key=lambda j: (-vals[j], j))
    best_v, best_t = -math.inf, 0.0
    for j in peaks[:4]:
        res = optimize.minimize_scalar(
            lambda t: -_log_abs_or_neg_inf(f, log_r, t),
            bounds=(thetas[j] - step, thetas[j] + step), method="bounded",
            options={"xatol": ANGLE_TOL},
        )
        cand = [(float(vals[j]), float(thetas[j])), (-float(res.fun), float(res.x))]
        for v, t in cand:
            if not math.isfinite(v):
                continue
            t = _snap_angle(t)
            tol = TIE_RTOL * max(1.0, abs(v))
            if v > best_v + tol or (abs(v - best_v) <= tol and t < best_t):
                best_v, best_t = v, t
    return best_v, best_t


def _fd_step(f: PowerSeries, r: float, psi: WeightFunction) -> float:
    _, nu = max_term(f, r)
    # capped so that small radii, where psi(t0) is O(1), still get a fine step
    return min(FD_STEP_CAP, max(1e-6, 1.0 / math.sqrt(psi(max(float(nu), psi.t0)))))


def log_derivative_fd(f: PowerSeries, r: float, psi: WeightFunction = DEFAULT_PSI,
                      angular_budget: int = 64) -> Tuple[float, float]:
    """a(r) as the slope of log M in log r, with an error estimate.

    Central differences at steps eta, eta/2, eta/4 are combined by two levels
    of Richardson extrapolation.
    """
    eta = _fd_step(f, r, psi)
    logM = lambda s: max_modulus(f, r * math.exp(s), angular_budget)[0]  # noqa: E731
    D = []
    for h in (eta, eta / 2, eta / 4):
        D.append((logM(h) - logM(-h)) / (2 * h))
    R1a = (4 * D[1] - D[0]) / 3
    R1b = (4 * D[2] - D[1]) / 3
    R2 = (16 * R1b - R1a) / 15
    center = abs(logM(0.0))
    roundoff = 4e-16 * max(1.0, center) / (eta / 4)
    return R2, abs(R2 - R1b) + roundoff


def log_derivative_logd(f: PowerSeries, r: float, angular_budget: int = 64) -> float:
    """Re(z_r f'(z_r) / f(z_r)) at a maximum-modulus point z_r."""
    _, theta = max_modulus(f, r, angular_budget)
    z = LogComplex(math.log(r), theta)
    fz = eval(f, z)
    dz = eval(f.times_n(), z)
    if fz.is_zero:
        raise ZeroDivisionError("f(z_r) = 0")
    if dz.is_zero:
        return 0.0
    return math.exp(dz.log_mag - fz.log_mag) * math.cos(dz.phase - fz.phase)


def log_derivative(f: PowerSeries, r: float, method: str = "logd", psi: WeightFunction = DEFAULT_PSI,
                   angular_budget: int = 64, cross_check: bool = False) -> float:
    """a(r, f) by ``logd`` or ``finite_diff``; ``cross_check`` compares the two."""
    if method not in ("logd", "finite_diff"):
        raise ValueError(f"unknown method {method!r}")
    if method == "logd" and not cross_check:
        return log_derivative_logd(f, r, angular_budget)
    a_fd, err = log_derivative_fd(f, r, psi, angular_budget)
    if not cross_check:
        return a_fd
    a_ld = log_derivative_logd(f, r, angular_budget)
    if abs(a_fd - a_ld) > max(1e-3 * abs(a_ld), err):
        raise DisagreementError(f"a_fd={a_fd!r} vs a_logd={a_ld!r} at r={r!r} (fd error {err:.3e})")
    return a_ld if method == "logd" else a_fd


# -- profiles -------------------------------------------------------------------


PROFILE_COLUMNS = ("r", "log_mu", "nu", "log_M", "theta_star", "a_fd", "a_logd", "disk_radius")


@dataclass
class ProfileRow:
    r: float
    log_mu: float = math.nan
    nu: int = -1
    log_M: float = math.nan
    theta_star: float = math.nan
    a_fd: float = math.nan
    a_fd_err: float = math.nan
    a_logd: float = math.nan
    disk_radius: Optional[float] = None
    flags: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags


@dataclass
class GrowthProfile:
    series: str
    psi: WeightFunction
    rows: List[ProfileRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def nu_nondecreasing(self) -> bool:
        nu = self.column("nu")
        return bool(np.all(np.diff(nu) >= 0))

    def a_fd_nondecreasing(self, rtol: float = 1e-7) -> bool:
        a = self.column("a_fd")
        return bool(np.all(np.diff(a) >= -rtol * np.abs(a[1:])))

    def logM_convex(self, atol: float = 1e-9) -> bool:
        """Slopes of log M against log r are nondecreasing (discrete convexity)."""
        x = np.log(self.column("r"))
        y = self.column("log_M")
        if len(x) < 3:
            return True
        slopes = np.diff(y) / np.diff(x)
        return bool(np.all(np.diff(slopes) >= -atol * np.maximum(1.0, np.abs(slopes[1:]))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for row in self.rows:
            w.writerow([
                _fmt(row.r), _fmt(row.log_mu), row.nu, _fmt(row.log_M), _fmt(row.theta_star),
                _fmt(row.a_fd), _fmt(row.a_logd),
                "" if row.disk_radius is None else _fmt(row.disk_radius),
            ])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def profile(f: PowerSeries, r_grid: Sequence[float], psi: WeightFunction = DEFAULT_PSI,
            angular_budget: int = 64) -> GrowthProfile:
    """One row of growth quantities per radius; failures become row flags."""
    rows = []
    for r in r_grid:
        row = ProfileRow(r=float(r))
        try:
            row.log_mu, row.nu = max_term(f, r)
            row.log_M, row.theta_star = max_modulus(f, r, angular_budget)
            row.a_logd = log_derivative_logd(f, r, angular_budget)
            row.a_fd, row.a_fd_err = log_derivative_fd(f, r, psi, angular_budget)
            if abs(row.a_fd - row.a_logd) > max(1e-3 * abs(row.a_logd), row.a_fd_err):
                row.flags.append("a_disagreement")
            if row.a_logd >= psi.t0:
                row.disk_radius = r / math.sqrt(psi(row.a_logd))
        except (ArithmeticError, ScanLimitError, ValueError) as exc:
            row.flags.append(f"{type(exc).__name__}: {exc}")
        rows.append(row)
    return GrowthProfile(f.name, psi, rows)


def alogM_scan(prof: GrowthProfile, psi: WeightFunction) -> ExceptionalSetReport:
    """Radii where a(r) > psi(log M(r)), measured logarithmically.

    Intervals are in log r.  Rows with log M < t0 lie outside the domain of
    psi and are skipped; the bound is the integral of dt/psi from the first
    usable log M.
    """
    usable = [row for row in prof.rows if row.ok and row.log_M >= psi.t0 and math.isfinite(row.a_logd)]
    if not usable:
        return ExceptionalSetReport(intervals=[], total_measure=0.0, theoretical_bound=None)
    xs = np.log([row.r for row in usable])
    flags = [row.a_logd > psi(row.log_M) for row in usable]
    iv = flagged_intervals(xs, flags)
    s0 = usable[0].log_M
    bound = None
    if psi.classification() is Convergence.CONVERGENT:
        bound = psi.integral_inverse(s0, math.inf)[0]
    width = float(np.max(np.diff(xs))) if len(xs) > 1 else 0.0
    return ExceptionalSetReport(
        intervals=iv, total_measure=measure(iv), theoretical_bound=bound,
        n_flagged=int(sum(flags)), cell_width=width, notes={"s0": s0},
    )
