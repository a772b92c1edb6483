"""An entire function with prescribed zero circles whose flat disks are small.

    f(z) = prod_{k >= 1} (1 + (z / h(k))^{m_k}),   m_k = floor(h(k) / h'(k)),

where h is the inverse of the scale g and h / h' = sqrt(A2(h)).  The zeros
of factor k sit on the circle |z| = h(k) at the angles pi (2j + 1) / m_k.

Every factor has nonnegative Taylor coefficients, so the maximum modulus is
attained on the positive axis and

    log M(r) = sum_k log(1 + b_k),   b_k = (r / h(k))^{m_k}.

Only log|f| is evaluated; phases are never needed.  Zeros are never listed
globally: the nearest zero on a circle is found arithmetically from the
angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate, special

from . import kernels
from .scales import GrowthScales, RangeError
from .weights import Convergence

TAIL_TOL = 1e-9
CUT_TOL = 1e-13
ZERO_TOL = 1e-12
SNAP_RTOL = 1e-9
LOG_B_DROP = 40.0
L_LIMIT = 6.0 / 5.0
L_SLACK = 1e-12
GOLDEN_ITERS = 64


class HypothesisError(ValueError):
    """The weight function does not meet the hypotheses of the construction."""


# -- construction -----------------------------------------------------------


def _floor_snapped(v: np.ndarray) -> np.ndarray:
    """floor(v), treating values within SNAP_RTOL of an integer as that integer."""
    near = np.rint(v)
    snapped = np.where(np.abs(v - near) <= SNAP_RTOL * np.maximum(1.0, np.abs(v)), near, v)
    return np.floor(snapped).astype(np.int64)


def tail_bound(r: float, log_hK: float, sqrt_A2_hK: float) -> float:
    """Bound on sum_{k > K} log(1 + b_k) from the radius h(K) and sqrt(A2(h(K))).

    With rho' = h(K)/r > 1 and tau' = log rho', the bound is
    (2 rho' / tau') exp(-tau' sqrt(A2(h(K)))).  It uses only m_k >= h/h' - 1,
    the monotonicity of h/h' and A3 >= A2.
    """
    tau = log_hK - math.log(r)
    if tau <= 0:
        return math.inf
    return 2.0 * math.exp(tau) / tau * math.exp(-tau * sqrt_A2_hK)


def coarse_tail_bound(rho: float) -> float:
    """The cruder tail estimate 2 rho / tau + rho with tau = log rho."""
    return 2.0 * rho / math.log(rho) + rho


@dataclass
class ProductFunction:
    """Zero circles k = 1..k_max of the product, with certified range.

    ``radii[i]``, ``log_h[i]`` and ``m[i]`` describe circle k = i + 1.
    """

    scales: GrowthScales
    log_h: np.ndarray
    m: np.ndarray
    sqrt_A2: np.ndarray
    r_max_valid: float
    tail_tol: float = TAIL_TOL
    notes: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.radii = np.exp(self.log_h)
        self.k = np.arange(1, len(self.log_h) + 1)

    @property
    def k_max(self) -> int:
        return int(len(self.log_h))

    def tail_bound_after(self, r: float, K: int) -> float:
        """Certified bound on sum_{k > K} log(1 + b_k) at radius r (1 <= K <= k_max)."""
        return tail_bound(r, float(self.log_h[K - 1]), float(self.sqrt_A2[K - 1]))

    def truncated(self, K: int) -> "ProductFunction":
        """The product over the first K circles only (a polynomial)."""
        if not 1 <= K <= self.k_max:
            raise ValueError(f"K must be in [1, {self.k_max}]")
        out = ProductFunction(
            scales=self.scales, log_h=self.log_h[:K].copy(), m=self.m[:K].copy(),
            sqrt_A2=self.sqrt_A2[:K].copy(), r_max_valid=0.0, tail_tol=self.tail_tol,
            notes=self.notes + [f"truncated to {K} circles"],
        )
        out.r_max_valid = min(self.r_max_valid, _largest_valid_r(out, float(out.radii[-1])))
        return out

    def summary(self) -> dict:
        return {
            "psi": self.scales.psi.to_dict(),
            "k_max": self.k_max,
            "r_max_valid": float(self.r_max_valid),
            "tail_tol": self.tail_tol,
            "first_radius": float(self.radii[0]),
            "first_multiplicity": int(self.m[0]),
            "last_radius": float(self.radii[-1]),
            "last_multiplicity": int(self.m[-1]),
            "K_est": float(self.scales.K),
            "L_est": float(self.scales.L),
        }


def _largest_valid_r(pf: ProductFunction, r_hi: float) -> float:
    """Largest r <= r_hi with tail_bound_after(r, k_max) < tail_tol (bisection)."""
    K = pf.k_max
    ok = lambda r: pf.tail_bound_after(r, K) < pf.tail_tol  # noqa: E731
    if ok(r_hi):
        return r_hi
    lo, hi = 1.0, r_hi
    if not ok(lo):
        raise RangeError("tail bound exceeds tolerance even at r = 1; build more circles")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return lo


def check_hypotheses(scales: GrowthScales) -> None:
    psi = scales.psi
    if psi.classification() is not Convergence.DIVERGENT:
        raise HypothesisError(f"{psi.label()} is convergent; the construction needs a divergent weight")
    if scales.K < 1.0 - L_SLACK:
        raise HypothesisError(f"lower log-slope bound {scales.K!r} < 1")
    if scales.L > L_LIMIT + L_SLACK:
        raise HypothesisError(f"upper log-slope bound {scales.L!r} >= 6/5 on the tabulated range")


def construct(scales: GrowthScales, r_max: float, tail_tol: float = TAIL_TOL,
              check: bool = True) -> ProductFunction:
    """Generate the zero circles needed to evaluate the product up to r_max.

    Circles run from k = 1 to the first K >= ceil(g(rho r_max)) + 1 whose
    tail bound at r_max is below ``tail_tol`` (or to the end of the scale
    table).  ``r_max_valid`` is the largest radius at which the tail after
    the last generated circle is still below ``tail_tol``.
    """
    if check:
        check_hypotheses(scales)
    if not 1 < r_max <= scales.r_max * (1 + 1e-14):
        raise RangeError(f"r_max must lie in (1, {scales.r_max!r}]")
    K_cap = int(math.floor(scales.g_max))
    if K_cap < 1:
        raise RangeError("scale table too short for a single circle")

    def circle(K: int) -> Tuple[float, float]:
        lh = scales.log_h(float(K))
        return lh, math.exp(0.5 * float(scales.log_A2_at(math.exp(lh))))

    rr = min(scales.rho(r_max) * r_max, scales.r_max)
    K = min(K_cap, int(math.ceil(scales.eval("g", rr))) + 1)
    while K < K_cap and tail_bound(r_max, *circle(K)) >= tail_tol:
        K = min(K_cap, K + max(16, K // 8))

    t = np.arange(1, K + 1, dtype=float)
    log_h = np.asarray(scales.log_h(t), dtype=float)
    sqrt_A2 = np.exp(0.5 * scales.log_A2_at(np.exp(log_h)))
    m = _floor_snapped(sqrt_A2)
    if np.any(np.diff(log_h) <= 0):
        raise RangeError("circle radii are not strictly increasing")
    if m[0] < 1 or np.any(np.diff(m) < 0):
        raise RangeError("multiplicities must be >= 1 and nondecreasing")
    pf = ProductFunction(scales=scales, log_h=log_h, m=m, sqrt_A2=sqrt_A2,
                         r_max_valid=0.0, tail_tol=tail_tol)
    pf.r_max_valid = _largest_valid_r(pf, r_max)
    if pf.r_max_valid < r_max:
        pf.notes.append(f"tail control lost above r={pf.r_max_valid!r}; extend the scale table")
    return pf


# -- evaluation -------------------------------------------------------------


def _check_r(pf: ProductFunction, r: float) -> None:
    if not 0 < r <= pf.r_max_valid * (1 + 1e-12):
        raise RangeError(f"r={r!r} outside (0, r_max_valid={pf.r_max_valid!r}]")


def _cut(pf: ProductFunction, r: float, eps: float = CUT_TOL) -> Tuple[int, float]:
    """Number of circles summed at radius r and the certified bound on the rest."""
    rho = pf.scales.rho(min(max(r, 1.0), pf.scales.r_max))
    K_lo = max(1, int(np.searchsorted(pf.log_h, math.log(rho * r), side="right")) + 1)
    if K_lo > pf.k_max:
        return pf.k_max, pf.tail_bound_after(r, pf.k_max)
    tau = pf.log_h[K_lo - 1:] - math.log(r)
    with np.errstate(over="ignore"):
        bounds = 2.0 * np.exp(tau) / tau * np.exp(-tau * pf.sqrt_A2[K_lo - 1:])
    hit = np.flatnonzero(bounds < eps)
    if hit.size:
        K = K_lo + int(hit[0])
    else:
        K = pf.k_max
    return K, min(float(pf.tail_bound_after(r, K)), coarse_tail_bound(rho))


def _log_b(pf: ProductFunction, r: float, K: int) -> np.ndarray:
    return pf.m[:K] * (math.log(r) - pf.log_h[:K])


def _candidate_circles(pf: ProductFunction, r: float) -> slice:
    """Circles that can hold the nearest zero of any point on |z| = r."""
    i = int(np.searchsorted(pf.radii, r))
    U = math.inf
    for j in (i - 1, i):
        if 0 <= j < pf.k_max:
            h, mk = pf.radii[j], pf.m[j]
            U = min(U, math.sqrt((r - h) ** 2 + 4 * r * h * math.sin(math.pi / (2 * mk)) ** 2))
    lo = int(np.searchsorted(pf.radii, r - U, side="left"))
    hi = int(np.searchsorted(pf.radii, r + U, side="right"))
    if hi >= pf.k_max and r + U > pf.radii[-1]:
        hi = pf.k_max
    return slice(lo, max(hi, lo + 1))


def eval_log_abs_many(pf: ProductFunction, r: float, thetas) -> Tuple[np.ndarray, float]:
    """log|f(r e^{i theta})| for an array of angles, plus the certified tail error.

    Points within 1e-12 r of a zero give -inf.
    """
    _check_r(pf, r)
    th = np.atleast_1d(np.asarray(thetas, dtype=float))
    K, tail = _cut(pf, r)
    vals = kernels.log_abs_sum(math.log(r), th, pf.log_h[:K], pf.m[:K])
    sl = _candidate_circles(pf, r)
    dist = kernels.min_zero_distance(r, th, pf.radii[sl], pf.m[sl])
    vals = np.where(dist < ZERO_TOL * r, -np.inf, vals)
    return vals, tail


def eval_log_abs(pf: ProductFunction, r: float, theta: float) -> Tuple[float, float]:
    """log|f(r e^{i theta})| and its certified tail error (-inf at a zero)."""
    vals, tail = eval_log_abs_many(pf, r, [theta])
    v = float(vals[0])
    return v, (0.0 if math.isinf(v) else tail)


@dataclass(frozen=True)
class LogMBounds:
    r: float
    lower: float
    upper: float
    S1: float
    S2: float
    S3: float
    tail_error: float
    n: int
    n_rho: int
    rho: float


def logM_bounds(pf: ProductFunction, r: float) -> LogMBounds:
    """Lower (counting function) and upper (S1 + S2 + S3) bounds on log M(r).

    The upper value is log M(r) itself up to the certified tail, because the
    product has nonnegative Taylor coefficients.
    """
    _check_r(pf, r)
    rho = pf.scales.rho(min(max(r, 1.0), pf.scales.r_max))
    K, tail = _cut(pf, r)
    lb = _log_b(pf, r, K)
    a = np.logaddexp(0.0, lb)
    n = int(np.searchsorted(pf.log_h, math.log(r), side="right"))
    n_rho = int(np.searchsorted(pf.log_h, math.log(rho * r), side="right"))
    n, n_rho = min(n, K), min(n_rho, K)
    S1 = math.fsum(a[:n])
    S2 = math.fsum(a[n:n_rho])
    S3 = math.fsum(a[n_rho:]) + tail
    lower = math.fsum(np.maximum(lb[:n], 0.0))
    return LogMBounds(r=r, lower=lower, upper=S1 + S2 + S3, S1=S1, S2=S2, S3=S3,
                      tail_error=tail, n=n, n_rho=n_rho, rho=rho)


def logM_upper(pf: ProductFunction, r: float) -> float:
    return logM_bounds(pf, r).upper


def logM_lower(pf: ProductFunction, r: float) -> float:
    return logM_bounds(pf, r).lower


def log_derivative(pf: ProductFunction, r: float) -> float:
    """a(r) = d log M / d log r = sum_k m_k b_k / (1 + b_k), exact for this product."""
    _check_r(pf, r)
    K, _ = _cut(pf, r)
    return math.fsum(pf.m[:K] * special.expit(_log_b(pf, r, K)))


# -- sums versus integrals --------------------------------------------------


@dataclass(frozen=True)
class SumIntegral:
    sum: float
    integral: float
    bound: float

    @property
    def holds(self) -> bool:
        return abs(self.sum - self.integral) <= self.bound * (1 + 1e-12) + 1e-12 * abs(self.sum)


def sum_vs_integral(F: Callable[[float], float], R: float,
                    dF: Optional[Callable] = None, sup_dF: Optional[float] = None,
                    n_sup: int = 4001) -> SumIntegral:
    """Compare sum_{k=1}^{floor R} F(k) with the integral of F over [R - floor R, R].

    The bound is R sup|F'| over [0, R].  Supply ``sup_dF`` when an analytic
    bound is known; otherwise |F'| (or a finite-difference estimate of it)
    is sampled on ``n_sup`` points, which is an estimate, not a proof.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    n = int(math.floor(R))
    s = math.fsum(F(float(k)) for k in range(1, n + 1))
    lo = R - n
    if n == 0:
        integral = 0.0
    else:
        breaks = list(np.linspace(lo, R, min(n, 200) + 1)[1:-1])
        integral = math.fsum(
            integrate.quad(F, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
            for a, b in zip([lo] + breaks, breaks + [R])
        )
    if sup_dF is None:
        ts = np.linspace(0.0, R, n_sup)
        if dF is not None:
            sup_dF = float(np.max(np.abs([dF(float(t)) for t in ts])))
        else:
            vals = np.array([F(float(t)) for t in ts])
            sup_dF = float(np.max(np.abs(np.gradient(vals, ts)))) if R > 0 else 0.0
    return SumIntegral(sum=s, integral=integral, bound=R * sup_dF)


def counting_integrand(scales: GrowthScales, r: float) -> Callable[[float], float]:
    """F(t) = (h/h')(t) log(r / h(t)) = sqrt(A2(h(t))) (log r - log h(t))."""
    log_r = math.log(r)

    def F(t: float) -> float:
        lh = scales.log_h(t)
        return math.exp(0.5 * float(scales.log_A2_at(math.exp(lh)))) * (log_r - lh)

    return F


def counting_derivative_bound(scales: GrowthScales, r: float) -> float:
    """(L c^{1/L} / 2) A2(r)^{1 - 1/L} log r + 1, a bound on |F'| on [0, g(r)]."""
    L, c = scales.L, scales.c
    return 0.5 * L * c ** (1.0 / L) * scales.eval("A2", r) ** (1.0 - 1.0 / L) * math.log(r) + 1.0


def counting_sum_check(scales: GrowthScales, r: float) -> SumIntegral:
    R = float(scales.eval("g", r))
    return sum_vs_integral(counting_integrand(scales, r), R,
                           sup_dF=counting_derivative_bound(scales, r))


# -- zeros ------------------------------------------------------------------


def _nearest_on_circle(h: float, mk: int, r: float, theta: float) -> Tuple[float, float]:
    j = math.floor(theta * mk / (2 * math.pi))
    phi = 2 * math.pi * (j + 0.5) / mk
    if theta - phi > math.pi / mk:
        phi += 2 * math.pi / mk
    elif phi - theta > math.pi / mk:
        phi -= 2 * math.pi / mk
    s = math.sin(0.5 * (theta - phi))
    return math.sqrt((r - h) ** 2 + 4 * r * h * s * s), phi


def nearest_zero(pf: ProductFunction, z: complex) -> Tuple[float, complex]:
    """Distance from z to the closest zero of the product, and that zero."""
    r = abs(z)
    if r > pf.r_max_valid * (1 + 1e-12):
        raise RangeError(f"|z|={r!r} beyond r_max_valid={pf.r_max_valid!r}")
    theta = math.atan2(z.imag, z.real) if r > 0 else 0.0
    i = int(np.searchsorted(pf.radii, r))
    lo, hi = i - 1, i
    best, best_zero = math.inf, complex(math.nan, math.nan)
    while True:
        d_lo = r - pf.radii[lo] if lo >= 0 else math.inf
        d_hi = pf.radii[hi] - r if hi < pf.k_max else math.inf
        if min(d_lo, d_hi) > best:
            break
        j = lo if d_lo <= d_hi else hi
        d, phi = _nearest_on_circle(float(pf.radii[j]), int(pf.m[j]), r, theta)
        if d < best:
            best, best_zero = d, complex(pf.radii[j] * math.cos(phi), pf.radii[j] * math.sin(phi))
        if j == lo:
            lo -= 1
        else:
            hi += 1
        if lo < 0 and hi >= pf.k_max:
            break
    return best, best_zero


def zero_distances(pf: ProductFunction, r: float, thetas) -> np.ndarray:
    """Distance to the nearest zero for each point r e^{i theta}."""
    _check_r(pf, r)
    sl = _candidate_circles(pf, r)
    return kernels.min_zero_distance(r, thetas, pf.radii[sl], pf.m[sl])


def d_max(pf: ProductFunction, r: float, oversample: int = 8) -> float:
    """max over |z| = r of the distance to the nearest zero.

    The zero set is symmetric under conjugation, so theta in [0, pi]
    suffices.  A grid with spacing pi / (oversample * m_max) is scanned; every
    cell whose Lipschitz upper bound (the distance is r-Lipschitz in theta)
    reaches the grid maximum is refined by golden-section search.
    """
    if not pf.radii[0] < r:
        raise RangeError(f"r={r!r} must exceed h(1)={pf.radii[0]!r}")
    _check_r(pf, r)
    sl = _candidate_circles(pf, r)
    radii, m = pf.radii[sl], pf.m[sl]
    n = oversample * int(np.max(m)) + 1
    grid = np.linspace(0.0, math.pi, n)
    step = grid[1] - grid[0]
    vals = kernels.min_zero_distance(r, grid, radii, m)
    vmax = float(np.max(vals))
    upper = np.maximum(vals[:-1], vals[1:]) + 0.5 * r * step
    cells = np.flatnonzero(upper >= vmax)
    a, b = grid[cells].copy(), grid[cells + 1].copy()
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc = kernels.min_zero_distance(r, c, radii, m)
    fd = kernels.min_zero_distance(r, d, radii, m)
    for _ in range(GOLDEN_ITERS):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - invphi * (b - a)
        d_new = a + invphi * (b - a)
        fc_new = np.where(left, kernels.min_zero_distance(r, c_new, radii, m), fd)
        fd_new = np.where(left, fc, kernels.min_zero_distance(r, d_new, radii, m))
        c, d, fc, fd = c_new, d_new, fc_new, fd_new
    return max(vmax, float(np.max(fc)), float(np.max(fd)))


# -- minimum modulus --------------------------------------------------------


@dataclass(frozen=True)
class MinModulusReport:
    n: int
    r_n: float
    bound: float
    bound_rigorous: float
    sampled_min: float
    tail_error: float
    tract_level: float
    one_tract: bool

    @property
    def holds(self) -> bool:
        return self.sampled_min >= self.bound and self.sampled_min >= self.bound_rigorous


def min_modulus_at_rn(pf: ProductFunction, n: int, n_theta: int = 4096,
                      tract_level: float = math.e) -> MinModulusReport:
    """Lower bounds for min log|f| on |z| = h(n + 1/2) and the sampled minimum.

    ``bound`` is sum_{k<=n} log(b_k - 1) - sum_{k>n} log(1 + b_k);
    ``bound_rigorous`` replaces the second sum by -sum log(1 - b_k), which
    is what |1 + w| >= 1 - |w| actually gives.  ``one_tract`` is set when the
    bound exceeds log(tract_level).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    t = n + 0.5
    if t > pf.scales.g_max:
        raise RangeError(f"h({t}) beyond the scale table")
    r_n = float(pf.scales.eval_h(t))
    _check_r(pf, r_n)
    K, tail = _cut(pf, r_n)
    if K <= n:
        raise RangeError("not enough circles beyond r_n")
    lb = _log_b(pf, r_n, K)
    inner = lb[:n]
    inner_terms = np.where(inner > LOG_B_DROP, inner, inner + np.log1p(-np.exp(-np.minimum(inner, LOG_B_DROP))))
    outer = lb[n:]
    head = math.fsum(inner_terms)
    bound = head - math.fsum(np.logaddexp(0.0, outer)) - tail
    bound_rig = head + math.fsum(np.log1p(-np.exp(outer))) - 2.0 * tail
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    vals, _ = eval_log_abs_many(pf, r_n, thetas)
    return MinModulusReport(
        n=n, r_n=r_n, bound=bound, bound_rigorous=bound_rig, sampled_min=float(np.min(vals)),
        tail_error=tail, tract_level=tract_level, one_tract=bound > math.log(tract_level),
    )


def feasible_n_max(pf: ProductFunction) -> int:
    """Largest n with h(n + 1/2) <= r_max_valid."""
    return int(math.floor(pf.scales.eval("g", min(pf.r_max_valid, pf.scales.r_max)) - 0.5))
