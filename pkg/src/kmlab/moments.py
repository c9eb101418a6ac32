"""Moment diagnostics of a particle ensemble.

Polynomial moments m_q = mean of <v>^q with <v> = sqrt(1 + |v|^2),
stretched-exponential weights exp(alpha <v>^s), their Mittag-Leffler
generalization, and the truncated moment series used to monitor uniform
boundedness.  High orders are accumulated in the log domain; every estimate
carries a Monte Carlo standard error from batch means (sqrt(N) batches),
which is robust to the mild pairing correlation a collision step introduces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .special_fn import MLSpec, log_mittag_leffler_array, logsumexp

LOG_SAFE = 700.0  # exponent budget before switching to log-scaled output

FLAG_OK = "ok"
FLAG_LOG = "log"  # value/std_err columns carry natural logs
FLAG_DEGRADED = "degraded"


class MomentEstimate(NamedTuple):
    """Monte Carlo estimate: value, standard error, log value, output flag."""

    value: float
    std_err: float
    log_value: float
    flag: str


def bracket_sq(velocities: np.ndarray) -> np.ndarray:
    """<v>^2 = 1 + |v|^2 per particle, for an (N, d) velocity array."""
    v = np.atleast_2d(np.asarray(velocities, dtype=float))
    return 1.0 + np.einsum("ij,ij->i", v, v)


def _batch_std_err(samples: np.ndarray) -> float:
    """Standard error of the mean via sqrt(N) batch means."""
    n = samples.size
    if n < 4:
        return float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    b = int(math.sqrt(n))
    means = samples[: b * (n // b)].reshape(b, n // b).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(b))


def _estimate_from_logs(log_w: np.ndarray) -> MomentEstimate:
    """Mean/std-err of weights given per-particle log-weights."""
    shift = log_w.max()
    scaled = np.exp(log_w - shift)
    mean_scaled = float(math.fsum(scaled) / scaled.size)
    se_scaled = _batch_std_err(scaled)
    log_value = shift + math.log(mean_scaled)
    if shift <= LOG_SAFE and log_value <= LOG_SAFE:
        factor = math.exp(shift)
        return MomentEstimate(factor * mean_scaled, factor * se_scaled, log_value, FLAG_OK)
    # Too large for a double: report logs (delta method for the log error).
    se_log = se_scaled / mean_scaled
    return MomentEstimate(log_value, se_log, log_value, FLAG_LOG)


def poly_moment(velocities: np.ndarray, q: float) -> MomentEstimate:
    """Polynomial moment of order q: mean of <v>^q (q >= 0)."""
    if q < 0:
        raise ValueError(f"moment order must be >= 0, got {q}")
    w2 = bracket_sq(velocities)
    if q == 0:
        return MomentEstimate(1.0, 0.0, 0.0, FLAG_OK)
    log_max = 0.5 * q * math.log(w2.max())
    if log_max > LOG_SAFE:
        return _estimate_from_logs(0.5 * q * np.log(w2))
    w = w2 ** (0.5 * q)
    value = float(math.fsum(w) / w.size)
    return MomentEstimate(value, _batch_std_err(w), math.log(value), FLAG_OK)


def _log_exponent(spec: MLSpec, w2: np.ndarray) -> np.ndarray:
    # alpha <v>^s computed as exp(log_alpha + (s/2) log <v>^2); underflow of
    # a certified-tiny rate is harmless (weight degrades to 1).
    return np.exp(spec.log_alpha + 0.5 * spec.s * np.log(w2))


def stretched_exp_moment(velocities: np.ndarray, spec: MLSpec) -> MomentEstimate:
    """Stretched-exponential moment: mean of exp(alpha <v>^s)."""
    w2 = bracket_sq(velocities)
    return _estimate_from_logs(_log_exponent(spec, w2))


def ml_moment(velocities: np.ndarray, spec: MLSpec) -> MomentEstimate:
    """Mittag-Leffler moment: mean of E_a(alpha^a <v>^2) with a = 2/s."""
    w2 = bracket_sq(velocities)
    a = spec.a
    log_x = a * spec.log_alpha + np.log(w2)
    return _estimate_from_logs(log_mittag_leffler_array(a, log_x))


def ml_partial_sum(log_moments: Sequence[float], spec: MLSpec, n: int | None = None) -> float:
    """log of sum_{q=0}^{n} alpha^(a q) m_{2q} / Gamma(a q + 1).

    `log_moments[q]` is ln m_{2q}; all orders up to n must be present.
    Returns the log of the partial sum (log-domain safe for any rate).
    """
    if n is None:
        n = len(log_moments) - 1
    if n < 0 or n >= len(log_moments):
        raise ValueError(f"need moments for orders 0..{n}, got {len(log_moments)} values")
    a = spec.a
    q = np.arange(n + 1, dtype=float)
    lg = np.array([math.lgamma(a * qq + 1.0) for qq in q])
    terms = a * q * spec.log_alpha + np.asarray(log_moments[: n + 1], dtype=float) - lg
    return logsumexp(terms)


def interpolate_moment(m_low: float, m_high: float, p: float, q: int) -> float:
    """Interpolation bound m_p <= m_{2q-2}^((2q-p)/2) m_{2q}^((p-2q+2)/2).

    `m_low` and `m_high` are the even moments of orders 2q-2 and 2q bracketing
    the requested order p.
    """
    if not (m_low > 0.0 and m_high > 0.0):
        raise ValueError("bracketing moments must be positive")
    if not (2 * q - 2 <= p <= 2 * q):
        raise ValueError(f"order p={p} outside [{2*q-2}, {2*q}]")
    return m_low ** ((2 * q - p) / 2.0) * m_high ** ((p - 2 * q + 2) / 2.0)


def poly_label(order: int) -> str:
    return f"m{order}"


def exp_label(spec: MLSpec) -> str:
    return f"exp:la={spec.log_alpha:.17g}:s={spec.s:.17g}"


def ml_label(spec: MLSpec) -> str:
    return f"ml:la={spec.log_alpha:.17g}:s={spec.s:.17g}"


@dataclass
class MomentTable:
    """Time-indexed record of moment diagnostics in long format.

    `columns` are diagnostic labels ("m4", "exp:la=...:s=...", ...); values,
    std_errs and flags are row-per-time lists aligned with `columns`.
    """

    columns: list[str] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    values: list[list[float]] = field(default_factory=list)
    std_errs: list[list[float]] = field(default_factory=list)
    flags: list[list[str]] = field(default_factory=list)

    def add_row(self, t: float, estimates: Sequence[MomentEstimate]):
        if len(estimates) != len(self.columns):
            raise ValueError("row length does not match table columns")
        self.times.append(t)
        self.values.append([e.value for e in estimates])
        self.std_errs.append([e.std_err for e in estimates])
        self.flags.append([e.flag for e in estimates])

    def column(self, label: str) -> np.ndarray:
        j = self.columns.index(label)
        return np.array([row[j] for row in self.values])

    def column_err(self, label: str) -> np.ndarray:
        j = self.columns.index(label)
        return np.array([row[j] for row in self.std_errs])

    @property
    def poly_orders(self) -> list[int]:
        return sorted(
            int(c[1:]) for c in self.columns if c.startswith("m") and c[1:].isdigit()
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MomentTable):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.times == other.times
            and self.values == other.values
            and self.std_errs == other.std_errs
            and self.flags == other.flags
        )
