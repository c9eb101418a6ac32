"""Numerical verification of the inequalities behind the moment bounds.

Each checker evaluates one inequality at a point (returning the signed
margin RHS - LHS, nonnegative when the inequality holds) and each sweep
drives a checker over a grid or random cloud, producing a CheckReport.
Near-tie margins from the fast vectorized pass are re-verified in 30-digit
arithmetic before they may count as violations, so roundoff in large
cancellations cannot produce false alarms.

The angular checks integrate the exact collision transforms, so they cover
the collision kinematics as well as the averaged bound itself.  For the
d >= 2 model the first two terms of the averaged bound carry the factor
C2/2 (mirroring the 1-D case); the variant with a bare C2 is numerically
false, with counterexamples as simple as v* = 0, |v| > 2.2, q = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import collisions, kernels, quadrature
from .errors import ConfigError
from .kernels import AngularKernel
from .special_fn import log_binomial, log_binomial_beta_sum

_RECHECK_BAND = 1e3  # widen the tolerance this much before trusting floats


@dataclass
class CheckReport:
    """Outcome of one inequality sweep."""

    lemma: str
    trials: int
    violations: int
    worst_margin: float  # min over trials of the (normalized) signed margin
    tolerance: float
    ranges: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        rng = ", ".join(f"{k}={v}" for k, v in self.ranges.items())
        return (
            f"[{status}] {self.lemma}: {self.trials} trials, "
            f"{self.violations} violations, worst margin {self.worst_margin:.3e} "
            f"(tolerance {self.tolerance:.1e}; {rng})"
        )


# ---------------------------------------------------------------------------
# Angular averaging bound

def _kac_lhs(v: float, v_star: float, q: int, kernel: AngularKernel) -> float:
    """Quadrature of the collision average of <.>^2q differences, 1-D model."""
    bx = 1.0 + v * v
    by = 1.0 + v_star * v_star

    def f(theta):
        vp, vps = collisions.kac_collide(v, v_star, theta)
        return ((1.0 + vp * vp) ** q + (1.0 + vps * vps) ** q - bx**q - by**q) * kernel.b(theta)

    if kernel.profile == kernels.CONSTANT and not kernel.truncated:
        # integrand is a trig polynomial of degree 2q: the periodic trapezoid
        # rule with > 2q+1 nodes is exact
        n = 8 * (q + 4)
        theta = -math.pi + (2.0 * math.pi / n) * np.arange(n)
        return float(np.sum(f(theta))) * (2.0 * math.pi / n)
    pts = [kernel.theta_min] if kernel.truncated else []
    pts += [math.pi / 2, -math.pi / 2, -kernel.theta_min] if kernel.truncated else [math.pi / 2, -math.pi / 2]
    return quadrature.integrate(f, -math.pi, math.pi, points=pts, abs_tol=0.0, rel_tol=1e-10)


def _boltzmann_lhs(v: np.ndarray, v_star: np.ndarray, q: int, kernel: AngularKernel) -> float:
    """Sphere quadrature of the collision average of <.>^2q differences."""
    d = kernel.d
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    un = np.linalg.norm(u)
    bx = 1.0 + float(v @ v)
    by = 1.0 + float(v_star @ v_star)
    if un == 0.0:
        return 0.0  # every collision is degenerate
    u_hat = u / un

    if d == 3:
        # mu = cos(theta) integrand is polynomial of degree <= 2q after the
        # azimuthal average; phi integrand is a trig polynomial: the product
        # Gauss-Legendre x trapezoid rule below is exact for constant kernels
        n_mu = max(2 * q + 6, 16)
        n_phi = max(2 * q + 6, 16)
        mu, wmu = quadrature.gauss_legendre(n_mu)
        phi = (2.0 * math.pi / n_phi) * np.arange(n_phi)
        theta = np.arccos(mu)
        TH = np.repeat(theta, n_phi)
        PH = np.tile(phi, n_mu)
        sig = collisions.scattering_direction(
            np.broadcast_to(u_hat, (TH.size, 3)).copy(), TH, PH
        )
        vp, vps = collisions.boltzmann_collide(
            np.broadcast_to(v, (TH.size, 3)).copy(),
            np.broadcast_to(v_star, (TH.size, 3)).copy(),
            sig,
        )
        g = (
            (1.0 + np.einsum("ij,ij->i", vp, vp)) ** q
            + (1.0 + np.einsum("ij,ij->i", vps, vps)) ** q
            - bx**q
            - by**q
        ) * kernel.b(TH)
        g = g.reshape(n_mu, n_phi)
        if kernel.profile == kernels.CONSTANT and not kernel.truncated:
            return float((g.sum(axis=1) * (2.0 * math.pi / n_phi)) @ wmu)
        # non-polynomial kernels: adaptive in theta after azimuthal averaging
        def f(th):
            out = np.empty_like(th)
            for i, t in enumerate(th):
                sig_i = collisions.scattering_direction(
                    np.broadcast_to(u_hat, (n_phi, 3)).copy(), np.full(n_phi, t), phi
                )
                vp_i, vps_i = collisions.boltzmann_collide(
                    np.broadcast_to(v, (n_phi, 3)).copy(),
                    np.broadcast_to(v_star, (n_phi, 3)).copy(),
                    sig_i,
                )
                avg = np.mean(
                    (1.0 + np.einsum("ij,ij->i", vp_i, vp_i)) ** q
                    + (1.0 + np.einsum("ij,ij->i", vps_i, vps_i)) ** q
                    - bx**q
                    - by**q
                )
                out[i] = avg * 2.0 * math.pi * math.sin(t) * kernel.b(t)
            return out

        pts = [kernel.theta_min] if kernel.truncated else []
        return quadrature.integrate(f, max(kernel.theta_min, 0.0), math.pi,
                                    points=pts + [math.pi / 2], abs_tol=0.0, rel_tol=1e-10)

    # d == 2: parametrize sigma by its signed angle psi against u_hat
    n = 8 * (q + 4)
    psi = -math.pi + (2.0 * math.pi / n) * np.arange(n)
    sig = collisions.scattering_direction(
        np.broadcast_to(u_hat, (n, 2)).copy(), np.abs(psi), np.where(psi >= 0, 0.0, math.pi)
    )
    vp, vps = collisions.boltzmann_collide(
        np.broadcast_to(v, (n, 2)).copy(), np.broadcast_to(v_star, (n, 2)).copy(), sig
    )
    g = (
        (1.0 + np.einsum("ij,ij->i", vp, vp)) ** q
        + (1.0 + np.einsum("ij,ij->i", vps, vps)) ** q
        - bx**q
        - by**q
    ) * kernel.b(np.abs(psi))
    if kernel.profile == kernels.CONSTANT and not kernel.truncated:
        return float(g.sum()) * (2.0 * math.pi / n)

    def f(psis):
        sig_i = collisions.scattering_direction(
            np.broadcast_to(u_hat, (psis.size, 2)).copy(),
            np.abs(psis),
            np.where(psis >= 0, 0.0, math.pi),
        )
        vp_i, vps_i = collisions.boltzmann_collide(
            np.broadcast_to(v, (psis.size, 2)).copy(),
            np.broadcast_to(v_star, (psis.size, 2)).copy(),
            sig_i,
        )
        return (
            (1.0 + np.einsum("ij,ij->i", vp_i, vp_i)) ** q
            + (1.0 + np.einsum("ij,ij->i", vps_i, vps_i)) ** q
            - bx**q
            - by**q
        ) * kernel.b(np.abs(psis))

    pts = (
        [-kernel.theta_min, kernel.theta_min] if kernel.truncated else []
    ) + [-math.pi / 2, math.pi / 2]
    return quadrature.integrate(f, -math.pi, math.pi, points=pts, abs_tol=0.0, rel_tol=1e-10)


def _angular_rhs(bx: float, by: float, q: int, c_const: float, eps_q: float) -> tuple[float, float]:
    """RHS of the averaged bound and its magnitude scale.

    -C/2 (X + Y) + C/2 (x Y' + X' y) + C q(q-1) eps_q x y (x + y)^(q-2)
    with x = <v>^2, X = x^q; the same shape serves both families.
    """
    t1 = bx**q + by**q
    t2 = bx * by ** (q - 1) + bx ** (q - 1) * by
    t3 = q * (q - 1) * eps_q * bx * by * (bx + by) ** (q - 2)
    rhs = -0.5 * c_const * t1 + 0.5 * c_const * t2 + c_const * t3
    scale = c_const * (t1 + t2 + t3)
    return rhs, scale


@dataclass
class AngularCheck:
    lhs: float
    rhs: float
    margin: float
    rel_margin: float


def check_angular_kac(v: float, v_star: float, q: int, kernel: AngularKernel,
                      c_const: float | None = None, eps_q: float | None = None) -> AngularCheck:
    """Margin of the 1-D angular averaging bound at one velocity pair."""
    if q < 2:
        raise ValueError("angular bound requires q >= 2")
    if c_const is None:
        c_const = kernels.angular_constant(kernel)
    if eps_q is None:
        eps_q = kernels.cancellation_coefficient(kernel, q)
    lhs = _kac_lhs(v, v_star, q, kernel)
    rhs, scale = _angular_rhs(1.0 + v * v, 1.0 + v_star * v_star, q, c_const, eps_q)
    margin = rhs - lhs
    return AngularCheck(lhs, rhs, margin, margin / scale)


def check_angular_boltzmann(v, v_star, q: int, kernel: AngularKernel,
                            c_const: float | None = None, eps_q: float | None = None) -> AngularCheck:
    """Margin of the d >= 2 angular averaging bound at one velocity pair."""
    if q < 2:
        raise ValueError("angular bound requires q >= 2")
    if c_const is None:
        c_const = kernels.angular_constant(kernel)
    if eps_q is None:
        eps_q = kernels.cancellation_coefficient(kernel, q)
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    lhs = _boltzmann_lhs(v, v_star, q, kernel)
    bx = 1.0 + float(v @ v)
    by = 1.0 + float(v_star @ v_star)
    rhs, scale = _angular_rhs(bx, by, q, c_const, eps_q)
    margin = rhs - lhs
    return AngularCheck(lhs, rhs, margin, margin / scale)


def odd_term_integral(v: float, v_star: float, q: int, kernel: AngularKernel) -> float:
    """Integral of the first-order (theta-odd) term of the expansion.

    <v'>^2 = E(theta) - 2 v v* sin(theta) cos(theta) with even E; the first
    order term of the power expansion is odd in theta, so its integral over
    the symmetric domain vanishes.  The quadrature pairs +-theta nodes and
    shares their trig values, realizing the cancellation exactly.
    """
    bx = 1.0 + v * v
    by = 1.0 + v_star * v_star

    def paired(theta):
        c = np.cos(theta)
        s = np.sin(theta)
        e_t = bx * c * c + by * s * s
        e_pi_t = bx * s * s + by * c * c
        sc = s * c
        # term(theta) + term(-theta) for both colliding partners
        t_plus = -2.0 * q * e_t ** (q - 1) * v * v_star * sc
        t_star_plus = 2.0 * q * e_pi_t ** (q - 1) * v * v_star * sc
        return (t_plus + (-t_plus)) + (t_star_plus + (-t_star_plus))

    n = 4 * (q + 8)
    theta = (math.pi / n) * (np.arange(n) + 0.5)
    vals = paired(theta) * kernel.b(theta)
    return float(math.fsum(vals)) * (math.pi / n)


def sweep_angular(
    kernel: AngularKernel,
    n_trials: int,
    rng: np.random.Generator,
    *,
    q_max: int = 20,
    v_range: float = 10.0,
    rel_tol: float = 1e-8,
) -> CheckReport:
    """Random sweep of the angular averaging bound for either family."""
    c_const = kernels.angular_constant(kernel)
    eps = {q: kernels.cancellation_coefficient(kernel, q) for q in range(2, q_max + 1)}
    worst = math.inf
    violations = 0
    for _ in range(n_trials):
        q = int(rng.integers(2, q_max + 1))
        if kernel.family == kernels.KAC:
            v, v_star = rng.uniform(-v_range, v_range, 2)
            chk = check_angular_kac(v, v_star, q, kernel, c_const, eps[q])
        else:
            v = rng.uniform(-v_range, v_range, kernel.d)
            v_star = rng.uniform(-v_range, v_range, kernel.d)
            chk = check_angular_boltzmann(v, v_star, q, kernel, c_const, eps[q])
        worst = min(worst, chk.rel_margin)
        if chk.rel_margin < -rel_tol:
            violations += 1
    return CheckReport(
        lemma=f"angular-averaging-{kernel.family}-d{kernel.d}",
        trials=n_trials,
        violations=violations,
        worst_margin=worst,
        tolerance=rel_tol,
        ranges={"|v|": f"<= {v_range}", "q": f"2..{q_max}"},
    )


# ---------------------------------------------------------------------------
# Auxiliary inequalities

def check_convex_estimate(a: float, b: float, t: float, p: float) -> float:
    """Margin of the convex-combination estimate.

    (ta + (1-t)b)^p + ((1-t)a + tb)^p - a^p - b^p
        <= -2t(1-t)(a^p + b^p) + 2t(1-t)(a b^(p-1) + a^(p-1) b)
    for a, b >= 0, t in [0, 1], p in (0, 1] or [2, inf).  On the boundary
    where exactly one argument vanishes and p < 1 the right side is +inf by
    continuity, so the margin is +inf (never a violation).
    """
    if a < 0 or b < 0:
        raise ValueError("arguments must be nonnegative")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if 1.0 < p < 2.0:
        raise ValueError("exponent p in (1, 2) is outside the estimate's range")
    if a == 0.0 and b == 0.0:
        return 0.0
    if p < 1.0 and (a == 0.0 or b == 0.0):
        return math.inf
    lhs = (t * a + (1 - t) * b) ** p + ((1 - t) * a + t * b) ** p - a**p - b**p
    cross = a * _pow0(b, p - 1.0) + _pow0(a, p - 1.0) * b
    rhs = 2.0 * t * (1.0 - t) * (cross - a**p - b**p)
    return rhs - lhs


def _convex_margin_mp(a, b, t, p) -> float:
    """High-precision re-evaluation of the convex-estimate margin."""
    if a == 0.0 and b == 0.0:
        return 0.0
    if p < 1.0 and (a == 0.0 or b == 0.0):
        return math.inf
    with mpmath.workdps(30):
        a, b, t, p = (mpmath.mpf(repr(float(x))) for x in (a, b, t, p))

        def pw(base, expo):
            if base == 0:
                return mpmath.mpf(1) if expo == 0 else mpmath.mpf(0)
            return base**expo

        lhs = pw(t * a + (1 - t) * b, p) + pw((1 - t) * a + t * b, p) - pw(a, p) - pw(b, p)
        rhs = 2 * t * (1 - t) * (
            a * pw(b, p - 1) + pw(a, p - 1) * b - pw(a, p) - pw(b, p)
        )
        return float(rhs - lhs)


def sweep_convex_estimate(
    *,
    grid_max: float = 5.0,
    grid_step: float = 0.1,
    t_step: float = 0.05,
    p_values: tuple[float, ...] = (0.3, 1.0, 2.0, 2.5, 6.0),
    abs_tol: float = 1e-12,
) -> CheckReport:
    """Full grid sweep of the convex-combination estimate."""
    av = np.round(np.arange(0.0, grid_max + grid_step / 2, grid_step), 10)
    tv = np.round(np.arange(0.0, 1.0 + t_step / 2, t_step), 10)
    A, B, T = np.meshgrid(av, av, tv, indexing="ij")
    A, B, T = A.ravel(), B.ravel(), T.ravel()
    trials = 0
    violations = 0
    worst = math.inf
    for p in p_values:
        both_zero = (A == 0) & (B == 0)
        trivial = (p < 1.0) & ((A == 0) | (B == 0)) & ~both_zero
        finite = ~both_zero & ~trivial
        Af, Bf, Tf = A[finite], B[finite], T[finite]
        Ap = Af**p
        Bp = Bf**p
        # 0**(p-1) with p >= 1 is fine; p < 1 boundary rows were split off
        cross = Af * _pow0_arr(Bf, p - 1.0) + _pow0_arr(Af, p - 1.0) * Bf
        lhs = (Tf * Af + (1 - Tf) * Bf) ** p + ((1 - Tf) * Af + Tf * Bf) ** p - Ap - Bp
        rhs = 2 * Tf * (1 - Tf) * (cross - Ap - Bp)
        margin = rhs - lhs
        trials += A.size
        suspect = margin < abs_tol * _RECHECK_BAND
        for idx in np.flatnonzero(suspect):
            m = _convex_margin_mp(Af[idx], Bf[idx], Tf[idx], p)
            worst = min(worst, m)
            if m < -abs_tol:
                violations += 1
        clean = margin[~suspect]
        if clean.size:
            worst = min(worst, float(clean.min()))
    return CheckReport(
        lemma="convex-combination-estimate",
        trials=trials,
        violations=violations,
        worst_margin=worst,
        tolerance=abs_tol,
        ranges={"a,b": f"0..{grid_max}", "t": "0..1", "p": str(p_values)},
    )


def _pow0_arr(x: np.ndarray, p: float) -> np.ndarray:
    """x**p elementwise with 0**0 = 1 and 0**positive = 0 (no zero/negative p mix)."""
    if p == 0.0:
        return np.ones_like(x)
    with np.errstate(divide="ignore"):
        out = np.where(x > 0, x, 1.0) ** p
    return np.where(x > 0, out, 0.0)


def check_binomial_split(x: float, y: float, p: float) -> float:
    """Margin of the binomial splitting bound.

    (x + y)^p <= sum_{k=0}^{floor((p+1)/2)} C(p, k) (x^k y^(p-k) + x^(p-k) y^k)
    for x, y > 0 and p > 1, with generalized binomial coefficients.
    """
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    if p <= 1.0:
        raise ValueError("the splitting bound needs p > 1")
    k_max = math.floor((p + 1) / 2)
    rhs = 0.0
    for k in range(k_max + 1):
        c = math.exp(log_binomial(p, k))
        rhs += c * (x**k * y ** (p - k) + x ** (p - k) * y**k)
    return rhs - (x + y) ** p


def sweep_binomial_split(
    *,
    grid: tuple[float, ...] | None = None,
    p_values: tuple[float, ...] = (1.5, 2.0, 3.7, 8.0),
    rel_tol: float = 1e-10,
) -> CheckReport:
    """Grid sweep of the binomial splitting bound (relative margins)."""
    if grid is None:
        grid = tuple(np.round(np.arange(0.2, 10.0 + 1e-9, 0.2), 10))
    trials = 0
    violations = 0
    worst = math.inf
    for p in p_values:
        for x in grid:
            for y in grid:
                m = check_binomial_split(x, y, p)
                rel = m / (x + y) ** p
                trials += 1
                worst = min(worst, rel)
                if rel < -rel_tol:
                    violations += 1
    return CheckReport(
        lemma="binomial-splitting",
        trials=trials,
        violations=violations,
        worst_margin=worst,
        tolerance=rel_tol,
        ranges={"x,y": f"{grid[0]}..{grid[-1]}", "p": str(p_values)},
    )


def check_product_monotonicity(x: float, y: float, a: float, b: float, p: float) -> float:
    """Margin of the split-spreading bound for 0 <= b <= a <= p/2, x, y >= 0:

    x^a y^(p-a) + x^(p-a) y^a <= x^b y^(p-b) + x^(p-b) y^b.
    """
    if not 0 <= b <= a <= p / 2:
        raise ValueError("need 0 <= b <= a <= p/2")
    if x < 0 or y < 0:
        raise ValueError("x and y must be nonnegative")
    inner = _pow0(x, a) * _pow0(y, p - a) + _pow0(x, p - a) * _pow0(y, a)
    outer = _pow0(x, b) * _pow0(y, p - b) + _pow0(x, p - b) * _pow0(y, b)
    return outer - inner


def _pow0(x: float, p: float) -> float:
    if x == 0.0:
        return 1.0 if p == 0.0 else 0.0
    return x**p


def sweep_product_monotonicity(
    n_trials: int,
    rng: np.random.Generator,
    *,
    rel_tol: float = 1e-10,
) -> CheckReport:
    """Random sweep of the split-spreading bound."""
    trials = 0
    violations = 0
    worst = math.inf
    for _ in range(n_trials):
        x, y = rng.uniform(0.0, 10.0, 2)
        p = rng.uniform(0.2, 16.0)
        a = rng.uniform(0.0, p / 2)
        b = rng.uniform(0.0, a)
        m = check_product_monotonicity(x, y, a, b, p)
        scale = max(_pow0(x, b) * _pow0(y, p - b) + _pow0(x, p - b) * _pow0(y, b), 1e-300)
        rel = m / scale
        trials += 1
        worst = min(worst, rel)
        if rel < -rel_tol:
            violations += 1
    return CheckReport(
        lemma="product-split-spreading",
        trials=trials,
        violations=violations,
        worst_margin=worst,
        tolerance=rel_tol,
        ranges={"x,y": "0..10", "p": "0.2..16"},
    )


@dataclass
class BetaSumDecay:
    """Tabulated decay of the Beta-weighted binomial sum."""

    a: float
    p_values: np.ndarray
    log_sums: np.ndarray
    fitted_slope: float
    empirical_constant: float  # sup over the tabulated p of p^(1+a) S(p)

    def weighted(self) -> np.ndarray:
        return np.exp((1.0 + self.a) * np.log(self.p_values) + self.log_sums)


def check_beta_sum_decay(a: float, p_max: int) -> BetaSumDecay:
    """Tabulate S(p), fit its log-log slope on the upper half of [3, p_max].

    S(p) = sum_k C(p-2, k-1) B(ak+1, a(p-k)+1) decays like p^-(1+a); the
    fitted slope should approach -(1+a) from above.
    """
    if a <= 1.0:
        raise ValueError(f"index a must exceed 1, got {a}")
    if p_max < 10:
        raise ValueError(f"p_max must be >= 10, got {p_max}")
    ps = np.arange(3, p_max + 1)
    logs = np.array([log_binomial_beta_sum(a, int(p)) for p in ps])
    upper = ps >= (3 + p_max) / 2
    slope = float(np.polyfit(np.log(ps[upper]), logs[upper], 1)[0])
    weighted = (1.0 + a) * np.log(ps) + logs
    return BetaSumDecay(
        a=a,
        p_values=ps,
        log_sums=logs,
        fitted_slope=slope,
        empirical_constant=float(np.exp(weighted.max())),
    )


def default_reports(
    rng: np.random.Generator,
    *,
    angular_trials: int = 1000,
    product_trials: int = 20_000,
    q_max: int = 12,
) -> list[CheckReport]:
    """The standard verification battery (smaller than the acceptance sweep)."""
    reports = [
        sweep_angular(
            AngularKernel(kernels.KAC, 1), angular_trials, rng, q_max=q_max
        ),
        sweep_angular(
            AngularKernel(kernels.BOLTZMANN, 3), angular_trials, rng, q_max=q_max
        ),
        sweep_convex_estimate(grid_step=0.25, t_step=0.1),
        sweep_binomial_split(grid=tuple(np.round(np.arange(0.5, 10.1, 0.5), 10))),
        sweep_product_monotonicity(product_trials, rng),
    ]
    for a in (1.5, 2.0):
        decay = check_beta_sum_decay(a, 200)
        tol = 0.15
        ok = decay.fitted_slope <= -(1.0 + a) + tol
        reports.append(
            CheckReport(
                lemma=f"beta-sum-decay-a{a}",
                trials=decay.p_values.size,
                violations=0 if ok else 1,
                worst_margin=-(1.0 + a) + tol - decay.fitted_slope,
                tolerance=tol,
                ranges={"p": "3..200", "slope": f"{decay.fitted_slope:.3f}"},
            )
        )
    return reports
