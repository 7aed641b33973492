"""Log-domain arithmetic and the special functions of the tree mixture.

All evidences are carried as natural logarithms.  Quantities that diverge in
the infinite-depth limit are represented by a finite *scaled* surrogate
tagged with the :class:`~bayestree.model.DivergenceClass` it belongs to.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from scipy.special import zetac

from .model import DivergenceClass, ModelParams

LN2 = math.log(2.0)

# s*e^t/u above this makes u invisible in double precision
MIX_RATIO_CUTOFF = 1e15
LOG_MIX_CUTOFF = math.log(MIX_RATIO_CUTOFF)

# |ln wbar| below this is treated as the wbar == 1 boundary
HEAVY_TOL = 1e-12


class DivergenceMismatch(ArithmeticError):
    """Two scaled evidences from different divergence classes were combined."""


EULER_GAMMA = 0.57721566490153286061

# (-1)^k (zeta(k) - 1) / k for the series of lgamma(1 + e)
_ZETA_TERMS = [(-1.0) ** k * float(zetac(k)) / k for k in range(2, 40)]


def _lgamma1p(e: float) -> float:
    """``ln Gamma(1 + e)`` for ``|e| <= 1/2`` with full relative accuracy.

    lgamma(1+e) = -log1p(e) + e(1 - gamma) + sum_k (-1)^k (zeta(k)-1)/k e^k
    """
    acc = 0.0
    for c in reversed(_ZETA_TERMS):
        acc = (acc + c) * e
    return -math.log1p(e) + e * (1.0 - EULER_GAMMA) + acc * e


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``.

    ``math.lgamma`` loses relative accuracy near its zeros at 1 and 2, so a
    series around 1 is used on [0.5, 2.5].
    """
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"log_gamma domain error: x={x} must be > 0")
    if 0.5 <= x <= 1.5:
        return _lgamma1p(x - 1.0)
    if 1.5 < x <= 2.5:
        e = x - 2.0
        return math.log1p(e) + _lgamma1p(e)
    return math.lgamma(x)


def log_weight(n0: int, n1: int, alpha: float) -> float:
    """``ln w(n0, n1)``, the log Beta-binomial weight of a split.

    w = 2^-n * G(n+2a) / (G(n0+a) G(n1+a)) * G(a)^2 / G(2a)
    """
    if n0 == 0 and n1 == 0:
        return 0.0
    # fixed argument order makes the symmetry exact
    if n0 > n1:
        n0, n1 = n1, n0
    n = n0 + n1
    lg = math.lgamma
    return (
        -n * LN2
        + lg(n + 2.0 * alpha)
        - lg(n0 + alpha)
        - lg(n1 + alpha)
        + 2.0 * lg(alpha)
        - lg(2.0 * alpha)
    )


def log_wbar(n: int, params: ModelParams) -> float:
    """``ln(s / w(n, 0))``: per-level growth of a multiplicity-``n`` point.

    Values within :data:`HEAVY_TOL` of zero are snapped to exactly zero.
    """
    if params.s == 0.0:
        return -math.inf
    v = math.log(params.s) - log_weight(n, 0, params.alpha)
    if abs(v) < HEAVY_TOL:
        return 0.0
    return v


def is_heavy(n: int, params: ModelParams) -> bool:
    """True when a multiplicity-``n`` point makes the evidence diverge."""
    return n >= 2 and log_wbar(n, params) >= 0.0


def log_mix(t: float, params: ModelParams) -> float:
    """Stable ``ln(u + s*e^t)``."""
    s, u = params.s, params.u
    if s == 0.0 or t == -math.inf:
        return math.log(u) if u > 0.0 else -math.inf
    a = math.log(s) + t
    if u == 0.0:
        return a
    lu = math.log(u)
    if a - lu > LOG_MIX_CUTOFF:
        return a
    if a > lu:
        return a + math.log1p(math.exp(lu - a))
    return lu + math.log1p(math.exp(a - lu))


def c_alpha(alpha: float) -> float:
    """Limit constant of ``sqrt(pi/(2n)) * w_n`` for balanced counts."""
    return math.exp((alpha - 1.0) * math.log(4.0) + 2.0 * math.lgamma(alpha) - math.lgamma(2.0 * alpha))


_LOG_MAX = math.log(sys.float_info.max)


@dataclass(frozen=True)
class LogValue:
    """A nonnegative quantity stored by its logarithm.

    ``state`` is one of ``"finite"``, ``"zero"`` or ``"divergent"``.  For a
    divergent value ``log`` holds the scaled surrogate and ``klass`` the
    divergence class it is comparable within.
    """

    state: str
    log: float = 0.0
    klass: DivergenceClass | None = None

    def __post_init__(self):
        if self.state not in ("finite", "zero", "divergent"):
            raise ValueError(f"unknown LogValue state {self.state!r}")

    @classmethod
    def finite(cls, log: float) -> LogValue:
        if log == -math.inf:
            return cls.zero()
        if math.isnan(log) or log == math.inf:
            raise ValueError(f"not a finite log value: {log}")
        return cls("finite", float(log))

    @classmethod
    def zero(cls) -> LogValue:
        return cls("zero", -math.inf)

    @classmethod
    def divergent(cls, scaled_log: float, klass: DivergenceClass | None = None) -> LogValue:
        return cls("divergent", float(scaled_log), klass)

    @property
    def is_finite(self) -> bool:
        return self.state == "finite"

    @property
    def is_zero(self) -> bool:
        return self.state == "zero"

    @property
    def is_divergent(self) -> bool:
        return self.state == "divergent"

    @property
    def value(self) -> float:
        if self.is_divergent:
            return math.inf
        if self.is_zero:
            return 0.0
        # saturate like IEEE arithmetic once the magnitude leaves double range
        return math.exp(self.log) if self.log < _LOG_MAX else math.inf

    def __mul__(self, other: LogValue) -> LogValue:
        if self.is_divergent and other.is_divergent:
            raise DivergenceMismatch("product of two divergent values is not comparable")
        if self.is_zero or other.is_zero:
            if self.is_divergent or other.is_divergent:
                raise ArithmeticError("0 * inf is undefined")
            return LogValue.zero()
        if self.is_divergent or other.is_divergent:
            d = self if self.is_divergent else other
            return LogValue.divergent(self.log + other.log, d.klass)
        return LogValue.finite(self.log + other.log)

    def __truediv__(self, other: LogValue) -> LogValue:
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.is_divergent and other.is_divergent:
            if self.klass != other.klass:
                raise DivergenceMismatch(
                    f"scaled evidences from different divergence classes: "
                    f"{self.klass} vs {other.klass}"
                )
            return LogValue.finite(self.log - other.log)
        if other.is_divergent:
            return LogValue.zero()
        if self.is_divergent:
            return LogValue.divergent(self.log - other.log, self.klass)
        if self.is_zero:
            return LogValue.zero()
        return LogValue.finite(self.log - other.log)


def variance_from_log_moments(log_mean: float, log_second: float) -> float:
    """``exp(log_second) - exp(log_mean)^2`` without cancellation or overflow.

    Written as ``mean^2 expm1(log_second - 2 log_mean)``; saturates to ``inf``
    past the double range, which happens right beside heavy multi-points.
    """
    excess = math.expm1(log_second - 2.0 * log_mean)
    if excess <= 0.0:
        return 0.0
    lv = 2.0 * log_mean + math.log(excess)
    return math.exp(lv) if lv < _LOG_MAX else math.inf
