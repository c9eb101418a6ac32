"""Angular collision kernels: classification, averaged constants, cancellation
sequences, and angle sampling.

Two families are supported: the one-dimensional model (angle theta on
[-pi, pi], kernel b(|theta|)) and the d >= 2 elastic model (scattering angle
theta on [0, pi], kernel b(cos theta) with the sin^(d-2) surface factor).
Profiles are either a constant level or the canonical power-singular family
b(theta) = level * |theta|^(-1-nu), optionally truncated at theta_min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import ConfigError

KAC = "kac"
BOLTZMANN = "boltzmann"
CONSTANT = "constant"
POWER = "power"

_BREAKS = (math.pi / 4, math.pi / 2, 3 * math.pi / 4)


@dataclass(frozen=True)
class AngularKernel:
    """Immutable description of an angular collision kernel."""

    family: str
    d: int
    profile: str = CONSTANT
    level: float = 1.0
    nu: float = 0.0
    theta_min: float = 0.0

    def __post_init__(self):
        if self.family not in (KAC, BOLTZMANN):
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.profile not in (CONSTANT, POWER):
            raise ConfigError(f"unknown kernel profile {self.profile!r}")
        if (self.family == KAC) != (self.d == 1):
            raise ConfigError("dimension 1 is required for (and implies) the kac family")
        if self.family == BOLTZMANN and self.d not in (2, 3):
            raise ConfigError(f"supported dimensions are 2 and 3, got d={self.d}")
        if self.level < 0.0:
            raise ConfigError(f"kernel level must be >= 0, got {self.level}")
        if self.profile == POWER and not (0.0 <= self.nu < 2.0):
            raise ConfigError(f"power singularity exponent must lie in [0, 2), got {self.nu}")
        if not (0.0 <= self.theta_min < math.pi / 2):
            raise ConfigError(f"theta_min must lie in [0, pi/2), got {self.theta_min}")

    def b(self, theta):
        """Kernel value at scattering angle |theta| (0 below the truncation)."""
        theta = np.abs(np.asarray(theta, dtype=float))
        if self.profile == CONSTANT:
            vals = np.full_like(theta, self.level)
        else:
            with np.errstate(divide="ignore"):
                vals = self.level * theta ** (-1.0 - self.nu)
        return np.where(theta >= self.theta_min, vals, 0.0)

    @property
    def truncated(self) -> bool:
        return self.theta_min > 0.0


def classify_singularity(kernel: AngularKernel) -> float:
    """Minimal singularity index of the kernel profile (0 for constant)."""
    if kernel.profile == CONSTANT:
        return 0.0
    return min(max(kernel.nu, 0.0), 2.0)


def sphere_measure(m: int) -> float:
    """Surface measure of the unit m-sphere S^m (|S^0| = 2, |S^1| = 2 pi, ...)."""
    if m < 0:
        raise ValueError(f"sphere dimension must be >= 0, got {m}")
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)


def _poly_inner(c, m: int):
    """integral_0^1 t (1 - c t)^m dt for c in [0, 1], integer m >= 0 (vectorized).

    Closed form [1 - (1-c)^(m+1) (1 + (m+1)c)] / (c^2 (m+1)(m+2)), written
    through expm1/log1p so it stays accurate as c -> 0; a short series takes
    over where even that cancels.
    """
    c = np.asarray(c, dtype=float)
    out = np.empty_like(c)
    small = (m + 2) * c < 1e-3
    if small.any():
        cs = c[small]
        term = np.full_like(cs, 0.5)
        acc = term.copy()
        for k in range(1, 40):
            term = term * (-cs) * (m - k + 1) * (k + 1) / (k * (k + 2.0))
            acc += term
            if k > m or np.all(np.abs(term) < 1e-18):
                break
        out[small] = acc
    big = ~small
    if big.any():
        cb = c[big]
        y = (m + 1) * np.log1p(-cb) + np.log1p((m + 1) * cb)
        out[big] = -np.expm1(y) / (cb * cb * (m + 1) * (m + 2))
    return out


def _weighted_integral(kernel: AngularKernel, weight, smooth_weight, weight_power: int):
    """integral over [theta_min, pi] of weight(theta) * b(theta) dtheta.

    `weight` must vanish like theta^weight_power at 0 and satisfy
    weight(theta) = theta^weight_power * smooth_weight(theta) with
    smooth_weight regular at 0; that structure lets the untruncated
    power-singular case go through the endpoint substitution.
    """
    lo = kernel.theta_min
    hi = math.pi
    if kernel.level == 0.0:
        return 0.0
    if kernel.profile == CONSTANT:
        return quadrature.integrate(
            lambda t: weight(t) * kernel.level,
            lo,
            hi,
            points=_BREAKS,
        )
    if lo > 0.0:
        pts = quadrature.geometric_points(lo, hi) + list(_BREAKS)
        return quadrature.integrate(
            lambda t: weight(t) * kernel.level * t ** (-1.0 - kernel.nu),
            lo,
            hi,
            points=pts,
        )
    # Untruncated power profile: peel the algebraic endpoint off [0, pi/4].
    alpha = weight_power - 1.0 - kernel.nu
    head = quadrature.integrate_algebraic_endpoint(
        lambda t: kernel.level * smooth_weight(t),
        alpha,
        math.pi / 4,
    )
    tail = quadrature.integrate(
        lambda t: weight(t) * kernel.level * t ** (-1.0 - kernel.nu),
        math.pi / 4,
        hi,
        points=(math.pi / 2, 3 * math.pi / 4),
    )
    return head + tail


def _sin2_2t(theta):
    s = np.sin(2.0 * theta)
    return s * s


def _sin2_2t_smooth(theta):
    # sin^2(2 theta) / theta^2, regular at 0 (limit 4)
    theta = np.asarray(theta, dtype=float)
    r = np.where(theta > 0.0, np.sin(2.0 * theta) / np.where(theta > 0.0, theta, 1.0), 2.0)
    return r * r


def angular_constant(kernel: AngularKernel) -> float:
    """Angular averaging constant of the kernel.

    Family kac: integral over [-pi, pi] of sin^2(2 theta) b(|theta|).
    Family d >= 2: |S^(d-2)| * integral over [0, pi] of b(cos theta) sin^d theta.
    Finite for every admissible profile (nu < 2), truncated or not.
    """
    if kernel.family == KAC:
        return 2.0 * _weighted_integral(kernel, _sin2_2t, _sin2_2t_smooth, 2)
    d = kernel.d

    def w(t):
        return np.sin(t) ** d

    def w_smooth(t):
        t = np.asarray(t, dtype=float)
        r = np.where(t > 0.0, np.sin(t) / np.where(t > 0.0, t, 1.0), 1.0)
        return r**d

    return sphere_measure(d - 2) * _weighted_integral(kernel, w, w_smooth, d)


def cancellation_coefficient(kernel: AngularKernel, q: int) -> float:
    """Normalized cancellation coefficient eps_q in (0, 1], q >= 2.

    Kernel-weighted angular average of integral_0^1 t (1 - c(theta) t)^(q-2) dt
    with c = sin^2(2 theta)/4 (kac) or sin^2(theta)/2 (d >= 2), normalized by
    half the angular constant so that eps_2 = 1 exactly.
    """
    if q < 2:
        raise ValueError(f"cancellation coefficient needs q >= 2, got {q}")
    c_const = angular_constant(kernel)
    if c_const <= 0.0:
        raise ConfigError("cancellation coefficient undefined for a zero kernel")
    m = q - 2
    if kernel.family == KAC:

        def w(t):
            s2 = _sin2_2t(t)
            return s2 * _poly_inner(0.25 * s2, m)

        def w_smooth(t):
            s2 = _sin2_2t(t)
            return _sin2_2t_smooth(t) * _poly_inner(0.25 * s2, m)

        val = 2.0 * _weighted_integral(kernel, w, w_smooth, 2)
        return 2.0 * val / c_const
    d = kernel.d

    def w(t):
        s = np.sin(t)
        return s**d * _poly_inner(0.5 * s * s, m)

    def w_smooth(t):
        t = np.asarray(t, dtype=float)
        s = np.sin(t)
        r = np.where(t > 0.0, s / np.where(t > 0.0, t, 1.0), 1.0)
        return r**d * _poly_inner(0.5 * s * s, m)

    val = sphere_measure(d - 2) * _weighted_integral(kernel, w, w_smooth, d)
    return 2.0 * val / c_const


def decay_rate_table(kernel: AngularKernel, q_max: int, q_min: int = 2):
    """Rows (q, eps_q, eps_q * q^(1 - xi/2)) for q in [q_min, q_max].

    xi is the classified singularity index; the weighted third column is the
    quantity whose decay to zero widens the admissible exponential order.
    """
    if q_max < 3:
        raise ValueError(f"q_max must be >= 3, got {q_max}")
    xi = classify_singularity(kernel)
    expo = 1.0 - xi / 2.0
    rows = []
    for q in range(q_min, q_max + 1):
        eps = cancellation_coefficient(kernel, q)
        rows.append((q, eps, eps * q**expo))
    return rows


def total_rate(kernel: AngularKernel) -> float:
    """Total collision rate: kernel integrated over its angular domain.

    Infinite for an untruncated power profile, which is a configuration error;
    truncate (theta_min > 0) to simulate singular kernels.
    """
    if kernel.profile == POWER and not kernel.truncated:
        raise ConfigError("untruncated singular kernel has an infinite total rate")
    lo, hi = kernel.theta_min, math.pi
    lvl, nu = kernel.level, kernel.nu
    if kernel.family == KAC:
        if kernel.profile == CONSTANT:
            return 2.0 * lvl * (hi - lo)
        return 2.0 * lvl * _power_mass(-1.0 - nu, lo, hi)
    d = kernel.d
    surf = sphere_measure(d - 2)
    if d == 2:
        if kernel.profile == CONSTANT:
            return surf * lvl * (hi - lo)
        return surf * lvl * _power_mass(-1.0 - nu, lo, hi)
    # d == 3: measure sin(theta)
    if kernel.profile == CONSTANT:
        return surf * lvl * (math.cos(lo) + 1.0)
    pts = quadrature.geometric_points(lo, hi)
    return surf * quadrature.integrate(
        lambda t: lvl * t ** (-1.0 - nu) * np.sin(t), lo, hi, points=pts
    )


def _power_mass(p: float, lo: float, hi: float) -> float:
    """integral of x^p over [lo, hi], handling the logarithmic case."""
    if lo <= 0.0:
        raise ValueError("power mass requires lo > 0")
    if p == -1.0:
        return math.log(hi / lo)
    return (hi ** (p + 1.0) - lo ** (p + 1.0)) / (p + 1.0)


def _sample_power(p: float, lo: float, hi: float, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF samples from density proportional to x^p on [lo, hi]."""
    if p == -1.0:
        return lo * (hi / lo) ** u
    e = p + 1.0
    return (lo**e + u * (hi**e - lo**e)) ** (1.0 / e)


def sample_angles(kernel: AngularKernel, n: int, rng: np.random.Generator):
    """Draw n collision angles from the normalized kernel density.

    kac family: returns signed theta with density prop. to b(|theta|) on
    +-[theta_min, pi]; |theta| is drawn first, then an independent sign, so
    the +- symmetry is exact.  d >= 2: returns (theta, phi) with theta density
    prop. to b * sin^(d-2) theta on [theta_min, pi]; phi is uniform on
    [0, 2 pi) for d = 3 and one of {0, pi} for d = 2.
    """
    if kernel.profile == POWER and not kernel.truncated:
        raise ConfigError("sampling a singular kernel requires a positive theta_min")
    lo, hi = kernel.theta_min, math.pi
    if kernel.family == KAC:
        u = rng.random(n)
        if kernel.profile == CONSTANT:
            theta = lo + u * (hi - lo)
        else:
            theta = _sample_power(-1.0 - kernel.nu, lo, hi, u)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return theta * sign
    d = kernel.d
    if d == 2:
        u = rng.random(n)
        if kernel.profile == CONSTANT:
            theta = lo + u * (hi - lo)
        else:
            theta = _sample_power(-1.0 - kernel.nu, lo, hi, u)
        phi = np.where(rng.random(n) < 0.5, 0.0, math.pi)
        return theta, phi
    # d == 3
    if kernel.profile == CONSTANT:
        # density prop. to sin(theta): cos(theta) uniform on [-1, cos(theta_min)]
        c_hi = math.cos(lo)
        cos_t = c_hi - rng.random(n) * (c_hi + 1.0)
        theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
    else:
        # propose prop. to theta^(-nu) (absorbing one sin factor as theta),
        # accept with probability sin(theta)/theta <= 1
        theta = np.empty(n)
        filled = 0
        while filled < n:
            k = n - filled
            cand = _sample_power(-kernel.nu, lo, hi, rng.random(k))
            acc = rng.random(k) < np.sin(cand) / cand
            took = int(acc.sum())
            theta[filled : filled + took] = cand[acc]
            filled += took
    phi = rng.random(n) * (2.0 * math.pi)
    return theta, phi


def sample_angle(kernel: AngularKernel, rng: np.random.Generator):
    """Single-draw convenience wrapper around sample_angles."""
    if kernel.family == KAC:
        return float(sample_angles(kernel, 1, rng)[0])
    theta, phi = sample_angles(kernel, 1, rng)
    return float(theta[0]), float(phi[0])
