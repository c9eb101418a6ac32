"""Special-function numerics: log-gamma, Beta, binomials, Mittag-Leffler.

Everything operates on positive arguments only, which keeps the log-gamma
calls away from poles.  Large values are handled in the log domain; the
Mittag-Leffler evaluator reports when a result is carried as a logarithm
because the plain value would overflow.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AccuracyError

LOG_DBL_MAX = math.log(sys.float_info.max)  # ~709.78
_SERIES_RTOL = 1e-16
_SERIES_MAX_TERMS = 100_000
_LOG_SCALE_CUTOFF = 700.0


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    if not x > 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_beta(x: float, y: float) -> float:
    """ln B(x, y) = ln Gamma(x) + ln Gamma(y) - ln Gamma(x+y), for x, y > 0."""
    if not (x > 0.0 and y > 0.0):
        raise ValueError(f"log_beta requires positive arguments, got ({x}, {y})")
    return math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y)


def beta_function(x: float, y: float) -> float:
    """Beta function B(x, y), evaluated in the log domain."""
    return math.exp(log_beta(x, y))


def log_binomial(n: float, k: float) -> float:
    """ln C(n, k) through log-gamma; n, k real with 0 <= k <= n."""
    if k < 0.0 or k > n:
        raise ValueError(f"log_binomial requires 0 <= k <= n, got n={n}, k={k}")
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


class MLValue(NamedTuple):
    """Mittag-Leffler evaluation result.

    `value` is the plain function value (inf when log_scaled), `log` its
    natural logarithm (always finite), and `log_scaled` marks results too
    large for a double.
    """

    value: float
    log: float
    log_scaled: bool


def _ml_log_series(a: float, log_x: float) -> float:
    """log of sum_q x^q / Gamma(a q + 1) via a scaled running sum."""
    # q = 0 term is 1 (log 0.0).
    m = 0.0  # running max of log-terms
    s = 1.0  # sum of exp(log_term - m)
    prev = 0.0
    for q in range(1, _SERIES_MAX_TERMS + 1):
        lt = q * log_x - math.lgamma(a * q + 1.0)
        if lt > m:
            s = s * math.exp(m - lt) + 1.0
            m = lt
        else:
            s += math.exp(lt - m)
        # stop in the decreasing tail once terms are negligible
        if lt < prev and lt - (m + math.log(s)) < math.log(_SERIES_RTOL):
            return m + math.log(s)
        prev = lt
    raise AccuracyError(
        f"Mittag-Leffler series hit the {_SERIES_MAX_TERMS}-term cap (a={a}, log x={log_x})"
    )


def log_mittag_leffler(a: float, x: float) -> float:
    """ln E_a(x) for a >= 1, x >= 0, where E_a(x) = sum_q x^q / Gamma(aq+1)."""
    if a < 1.0:
        raise ValueError(f"Mittag-Leffler index must satisfy a >= 1, got {a}")
    if x < 0.0:
        raise ValueError(f"Mittag-Leffler argument must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return _ml_log_series(a, math.log(x))


def mittag_leffler(a: float, x: float) -> MLValue:
    """Evaluate E_a(x); results beyond double range come back log-scaled."""
    log_val = log_mittag_leffler(a, x)
    log_scaled = log_val > _LOG_SCALE_CUTOFF or (x > 0.0 and x ** (1.0 / a) > _LOG_SCALE_CUTOFF)
    if log_scaled:
        return MLValue(math.inf, log_val, True)
    return MLValue(math.exp(log_val), log_val, False)


def log_mittag_leffler_array(a: float, log_x: np.ndarray) -> np.ndarray:
    """Vectorized ln E_a(x) over an array of log-arguments (use -inf for x = 0)."""
    if a < 1.0:
        raise ValueError(f"Mittag-Leffler index must satisfy a >= 1, got {a}")
    log_x = np.asarray(log_x, dtype=float)
    m = np.zeros_like(log_x)  # q = 0 term
    s = np.ones_like(log_x)
    prev = np.zeros_like(log_x)
    active = np.isfinite(log_x)
    q = 0
    while active.any():
        q += 1
        if q > _SERIES_MAX_TERMS:
            raise AccuracyError(f"Mittag-Leffler series hit the {_SERIES_MAX_TERMS}-term cap")
        lx = log_x[active]
        lt = q * lx - math.lgamma(a * q + 1.0)
        ma = m[active]
        sa = s[active]
        grow = lt > ma
        sa = np.where(grow, sa * np.exp(ma - lt) + 1.0, sa + np.exp(lt - ma))
        ma = np.maximum(ma, lt)
        m[active] = ma
        s[active] = sa
        done = (lt < prev[active]) & (lt - (ma + np.log(sa)) < math.log(_SERIES_RTOL))
        prev[active] = lt
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return m + np.log(s)


@dataclass(frozen=True)
class MLSpec:
    """Exponential-weight specification: order s and rate alpha.

    The rate is stored canonically as `log_alpha`; certified rates from the
    smallness recipe can be far below the smallest positive double, so the
    log form is authoritative.  The derived index a = 2/s is recomputed,
    never stored.
    """

    s: float
    log_alpha: float

    def __post_init__(self):
        if not (0.0 < self.s <= 2.0):
            raise ValueError(f"order s must lie in (0, 2], got {self.s}")
        if not math.isfinite(self.log_alpha):
            raise ValueError(f"log_alpha must be finite, got {self.log_alpha}")

    @classmethod
    def from_alpha(cls, alpha: float, s: float) -> "MLSpec":
        if not alpha > 0.0:
            raise ValueError(f"rate alpha must be positive, got {alpha}")
        return cls(s=s, log_alpha=math.log(alpha))

    @property
    def a(self) -> float:
        return 2.0 / self.s

    @property
    def alpha(self) -> float:
        """Plain rate; may underflow to 0.0 (log_alpha stays authoritative)."""
        try:
            return math.exp(self.log_alpha)
        except OverflowError:
            return math.inf


def log_binomial_beta_sum(a: float, p: int) -> float:
    """log of sum_{k=1}^{floor((p+1)/2)} C(p-2, k-1) B(ak+1, a(p-k)+1).

    This is the Beta-weighted binomial sum whose decay in p controls the
    quadratic term of the partial-sum bound; evaluated in the log domain.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    k_max = (p + 1) // 2
    k = np.arange(1, k_max + 1, dtype=float)
    lb = _lgamma_arr(p - 1.0) - _lgamma_arr(k) - _lgamma_arr(p - 1.0 - (k - 1.0))
    lbeta = (
        _lgamma_arr(a * k + 1.0)
        + _lgamma_arr(a * (p - k) + 1.0)
        - _lgamma_arr(a * p + 2.0)
    )
    terms = lb + lbeta
    m = terms.max()
    return float(m + np.log(np.exp(terms - m).sum()))


_lgamma_arr = np.vectorize(math.lgamma, otypes=[float])


def logsumexp(terms: np.ndarray) -> float:
    """log(sum(exp(terms))) with the usual max shift; -inf terms allowed."""
    terms = np.asarray(terms, dtype=float)
    m = terms.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.exp(terms - m).sum()))
