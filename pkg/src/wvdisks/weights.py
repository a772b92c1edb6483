"""Weight functions psi from the iterated-logarithm family.

    psi(t) = c * t * log t * log log t * ... * log^{m-1} t * (log^m t)^alpha

Every member is positive and increasing on its domain and has
1 <= t psi'(t) / psi(t) -> 1, so the family is "regular" with K = 1.
The integral of 1/psi converges exactly when alpha > 1.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from scipy import integrate

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10


class DomainError(ValueError):
    """Argument lies outside the domain of a weight function."""


class Convergence(str, enum.Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"


@dataclass(frozen=True)
class WeightFunction:
    """One member of the log-iterate family.

    ``m`` is the number of iterated logarithms, ``alpha`` the power on the
    innermost one, ``t0`` the left end of the domain and ``c_pre`` an
    optional constant factor.
    """

    m: int = 1
    alpha: float = 1.0
    t0: float = math.e
    c_pre: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not self.c_pre > 0:
            raise ValueError(f"c_pre must be > 0, got {self.c_pre!r}")
        if not self.t0 >= 1:
            raise ValueError(f"t0 must be >= 1, got {self.t0!r}")
        logs = self.iterated_logs(self.t0)
        # every iterated log >= 1 at t0 gives psi(t0) >= c_pre * t0
        if min(logs) < 1 - 1e-12:
            raise DomainError(
                f"t0={self.t0!r} too small: iterated logs {logs} must all be >= 1"
            )
        if self(self.t0) < self.t0 * (1 - 1e-12):
            raise DomainError(f"psi(t0) < t0 for {self.label()}")

    # -- evaluation -----------------------------------------------------

    def iterated_logs(self, t: float) -> Tuple[float, ...]:
        out = []
        v = float(t)
        for _ in range(self.m):
            if v <= 0:
                raise DomainError(f"iterated log undefined at t={t!r}")
            v = math.log(v)
            out.append(v)
        if out[-1] <= 0:
            raise DomainError(f"log^{self.m}({t!r}) = {out[-1]!r} <= 0")
        return tuple(out)

    def _check(self, t: float) -> None:
        if not t >= self.t0 * (1 - 1e-15):
            raise DomainError(f"t={t!r} below t0={self.t0!r}")

    def __call__(self, t: float) -> float:
        return self.eval(t)

    def eval(self, t: float) -> float:
        self._check(t)
        logs = self.iterated_logs(t)
        val = self.c_pre * float(t)
        for v in logs[:-1]:
            val *= v
        return val * logs[-1] ** self.alpha

    def log_eval(self, t: float) -> float:
        """log psi(t); finite for t far beyond the float range of psi."""
        self._check(t)
        logs = self.iterated_logs(t)
        acc = math.log(self.c_pre) + logs[0]
        for v in logs[:-1]:
            acc += math.log(v)
        return acc + self.alpha * math.log(logs[-1])

    def log_slope(self, t: float) -> float:
        """t psi'(t) / psi(t) = 1 + sum_j 1/(L_1...L_j) + alpha/(L_1...L_m)."""
        self._check(t)
        logs = self.iterated_logs(t)
        s = 1.0
        prod = 1.0
        for j, v in enumerate(logs):
            prod *= v
            s += (self.alpha if j == self.m - 1 else 1.0) / prod
        return s

    def derivative(self, t: float) -> float:
        return self.eval(t) * self.log_slope(t) / t

    eval_derivative = derivative

    def _logs_array(self, t) -> list:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t0 * (1 - 1e-15)):
            raise DomainError(f"values below t0={self.t0!r}")
        logs = []
        v = t
        for _ in range(self.m):
            v = np.log(v)
            logs.append(v)
        return logs

    def log_eval_array(self, t) -> np.ndarray:
        logs = self._logs_array(t)
        acc = math.log(self.c_pre) + logs[0]
        for v in logs[:-1]:
            acc = acc + np.log(v)
        return acc + self.alpha * np.log(logs[-1])

    def log_slope_array(self, t) -> np.ndarray:
        logs = self._logs_array(t)
        s = np.ones_like(logs[0])
        prod = np.ones_like(logs[0])
        for j, v in enumerate(logs):
            prod = prod * v
            s = s + (self.alpha if j == self.m - 1 else 1.0) / prod
        return s

    # -- integrals of 1/psi ---------------------------------------------

    def _inv_in_log(self, u: float) -> float:
        # 1/psi(e^u) * e^u, i.e. the integrand after t = e^u
        logs = [u]
        for _ in range(self.m - 1):
            logs.append(math.log(logs[-1]))
        val = self.c_pre
        for v in logs[:-1]:
            val *= v
        return 1.0 / (val * logs[-1] ** self.alpha)

    def integral_inverse(self, t_lo: float, t_hi: float) -> Tuple[float, float]:
        """Integral of dt/psi over [t_lo, t_hi] (t_hi may be inf), with error estimate."""
        self._check(t_lo)
        if t_hi < t_lo:
            raise DomainError("t_hi < t_lo")
        if t_hi == t_lo:
            return 0.0, 0.0
        u_hi = math.inf if math.isinf(t_hi) else math.log(t_hi)
        val, err = integrate.quad(
            self._inv_in_log, math.log(t_lo), u_hi,
            epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=500,
        )
        return val, err

    def antiderivative_inverse(self, t: float) -> float:
        """Closed-form antiderivative of 1/psi, only for m = 1."""
        if self.m != 1:
            raise NotImplementedError("closed form only for m = 1")
        lt = math.log(t)
        if self.alpha == 1:
            return math.log(lt) / self.c_pre
        return lt ** (1 - self.alpha) / ((1 - self.alpha) * self.c_pre)

    def tail_integral(self, t: float) -> float:
        """V(t) = integral of du/psi(u) over [t, inf); finite only if alpha > 1."""
        if self.classification() is Convergence.DIVERGENT:
            raise DomainError(f"{self.label()} is divergent; V is undefined")
        self._check(t)
        if self.m == 1:
            return math.log(t) ** (1 - self.alpha) / ((self.alpha - 1) * self.c_pre)
        return self.integral_inverse(t, math.inf)[0]

    def classification(self) -> Convergence:
        return Convergence.CONVERGENT if self.alpha > 1 else Convergence.DIVERGENT

    # -- serialization --------------------------------------------------

    def label(self) -> str:
        s = f"psi{{m={self.m},alpha={self.alpha!r},t0={self.t0!r}"
        if self.c_pre != 1.0:
            s += f",c_pre={self.c_pre!r}"
        return s + "}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m"] = int(d["m"])
        if self.c_pre == 1.0:
            del d["c_pre"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WeightFunction":
        unknown = set(d) - {"m", "alpha", "t0", "c_pre"}
        if unknown:
            raise ValueError(f"unknown weight-function fields: {sorted(unknown)}")
        return cls(
            m=int(d.get("m", 1)),
            alpha=float(d.get("alpha", 1.0)),
            t0=parse_t0(d["t0"]) if "t0" in d else default_t0(int(d.get("m", 1)), float(d.get("alpha", 1.0))),
            c_pre=float(d.get("c_pre", 1.0)),
        )


def parse_t0(token) -> float:
    """Accept a number, ``e``, ``eK`` or ``e^K`` (meaning exp(K))."""
    if isinstance(token, (int, float)):
        return float(token)
    s = str(token).strip()
    m = re.fullmatch(r"e(?:\^?\(?([-+]?[0-9]*\.?[0-9]+)\)?)?", s)
    if m:
        return math.exp(float(m.group(1))) if m.group(1) else math.e
    return float(s)


_SPEC_RE = re.compile(r"^\s*(?:psi)?\s*\{?(.*?)\}?\s*$")


def parse_psi(spec: str) -> WeightFunction:
    """Parse ``psi{m=1,alpha=2,t0=e}`` or the bare ``m=1,alpha=2,t0=e``."""
    body = _SPEC_RE.match(spec).group(1)
    fields = {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        if "=" not in part:
            raise ValueError(f"malformed psi field {part!r} in {spec!r}")
        key, val = (x.strip() for x in part.split("=", 1))
        fields[key] = val
    if not fields:
        raise ValueError(f"empty psi spec {spec!r}")
    try:
        return WeightFunction.from_dict(fields)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad psi spec {spec!r}: {exc}") from exc


def default_t0(m: int, alpha: float, L: float | None = None, k_max: int = 200) -> float:
    """Smallest e^k with all iterated logs >= 1 and t psi'/psi <= L on [e^k, inf).

    The log slope of the family is decreasing in t, so checking the left end
    suffices. With ``L=None`` only the domain condition is imposed.
    """
    for k in range(1, k_max + 1):
        t = math.exp(k)
        try:
            psi = WeightFunction(m=m, alpha=alpha, t0=t)
        except DomainError:
            continue
        if L is None or psi.log_slope(t) <= L * (1 + 1e-12):
            return t
    raise DomainError(f"no t0 = e^k with k <= {k_max} meets L={L}")


def classify(psi: WeightFunction, T: float | None = None) -> Tuple[Convergence, float]:
    """Convergence class by the alpha rule, plus the integral of 1/psi over [t0, T].

    ``T`` defaults to infinity for convergent members and to t0 * e^10 for
    divergent ones.
    """
    kind = psi.classification()
    if T is None:
        T = math.inf if kind is Convergence.CONVERGENT else psi.t0 * math.exp(10)
    if math.isinf(T) and kind is Convergence.DIVERGENT:
        return kind, math.inf
    return kind, psi.integral_inverse(psi.t0, T)[0]


def regularity_bounds(psi: WeightFunction, t_lo: float, t_hi: float, n_samples: int = 256) -> Tuple[float, float]:
    """Inf and sup of t psi'(t)/psi(t) over a geometric grid on [t_lo, t_hi]."""
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    if not (psi.t0 * (1 - 1e-15) <= t_lo < t_hi):
        raise DomainError(f"need t0 <= t_lo < t_hi, got [{t_lo!r}, {t_hi!r}]")
    ts = np.geomspace(t_lo, t_hi, n_samples)
    ts[0], ts[-1] = t_lo, t_hi
    slopes = [psi.log_slope(float(t)) for t in ts]
    return min(slopes), max(slopes)
