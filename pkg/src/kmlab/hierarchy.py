"""Closed moment ODE hierarchy and its constructive uniform bounds.

The hierarchy evolves m[q] (standing for the even moment of order 2q) under
the equality version of the moment differential inequalities:

    m[0]' = m[1]' = 0
    m[q]' = -C m[0] m[q] + C m[1] m[q-1]
            + C q (q-1) eps_q * sum_{k=1}^{floor((q+1)/2)} C(q-2, k-1) m[k] m[q-k]

with C the kernel's angular constant and eps_q its cancellation sequence.
The sum only reaches indices <= floor((q+1)/2) <= q, so truncation at Q needs
no closure.  `uniform_bounds` realizes the recursive max-chain bound, and
`rate_recipe` turns the smallness conditions for the partial-sum argument
into a concrete (q0, rate) pair; the certified rate is astronomically small
for singular kernels, so it is carried in log form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BlowUpError, ConfigError
from .kernels import AngularKernel
from .special_fn import MLSpec, log_binomial_beta_sum, logsumexp

_LN2 = math.log(2.0)
_BLOWUP = 1e300


@dataclass
class HierarchyState:
    """Truncated moment vector with the constants that drive it."""

    m: np.ndarray  # m[q] = moment of order 2q, q = 0..Q
    c_const: float  # angular constant of the kernel
    eps: np.ndarray  # eps[q] for q = 0..Q (entries below q=2 unused)
    t: float = 0.0

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.eps = np.asarray(self.eps, dtype=float)
        if self.m.ndim != 1 or self.m.size < 3:
            raise ConfigError("hierarchy needs moments up to order >= 4 (Q >= 2)")
        if self.eps.shape != self.m.shape:
            raise ConfigError("eps array must match the moment vector length")
        if np.any(self.m < 0):
            raise ConfigError("moments must be nonnegative")

    @property
    def q_max(self) -> int:
        return self.m.size - 1


def state_from_kernel(kernel: AngularKernel, m0: np.ndarray) -> HierarchyState:
    """Build a state from a kernel (quadrature constants) and initial moments."""
    m0 = np.asarray(m0, dtype=float)
    q_max = m0.size - 1
    eps = np.zeros(q_max + 1)
    for q in range(2, q_max + 1):
        eps[q] = kernels.cancellation_coefficient(kernel, q)
    return HierarchyState(m=m0.copy(), c_const=kernels.angular_constant(kernel), eps=eps)


def hierarchy_rhs(state: HierarchyState, m: np.ndarray | None = None) -> np.ndarray:
    """Right-hand side of the moment ODE system at the given moment vector."""
    if m is None:
        m = state.m
    q_max = m.size - 1
    c = state.c_const
    out = np.zeros_like(m)
    for q in range(2, q_max + 1):
        cross = 0.0
        for k in range(1, (q + 1) // 2 + 1):
            cross += math.comb(q - 2, k - 1) * m[k] * m[q - k]
        out[q] = (
            -c * m[0] * m[q]
            + c * m[1] * m[q - 1]
            + c * q * (q - 1) * state.eps[q] * cross
        )
    return out


@dataclass
class HierarchyTrajectory:
    times: np.ndarray
    m: np.ndarray  # shape (len(times), Q+1)

    def moment(self, q: int) -> np.ndarray:
        return self.m[:, q]


# Dormand-Prince 5(4) coefficients
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


def integrate_hierarchy(
    state: HierarchyState,
    t_end: float,
    record_times: np.ndarray | None = None,
    *,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
) -> HierarchyTrajectory:
    """Integrate the hierarchy with an adaptive embedded Runge-Kutta pair.

    Steps whose result would leave the nonnegative orthant are rejected and
    retried with a smaller h.  Any component exceeding 1e300 raises
    BlowUpError carrying the blow-up time.
    """
    if record_times is None:
        record_times = np.linspace(state.t, t_end, 101)
    record_times = np.asarray(record_times, dtype=float)
    if record_times[0] < state.t - 1e-15 or record_times[-1] > t_end + 1e-15:
        raise ConfigError("record times must lie within [t0, t_end]")
    t = state.t
    y = state.m.copy()
    out = np.empty((record_times.size, y.size))
    next_rec = 0
    while next_rec < record_times.size and record_times[next_rec] <= t + 1e-15:
        out[next_rec] = y
        next_rec += 1
    h = min(1e-3, max(t_end - t, 1e-3))
    f = hierarchy_rhs(state, y)
    while next_rec < record_times.size:
        target = record_times[next_rec]
        h = min(h, target - t)
        if h <= 0:
            out[next_rec] = y
            next_rec += 1
            continue
        k = [f]
        for i in range(1, 7):
            yi = y + h * sum(a * ki for a, ki in zip(_DP_A[i], k))
            k.append(hierarchy_rhs(state, yi))
        y5 = y + h * sum(b * ki for b, ki in zip(_DP_B5, k))
        y4 = y + h * sum(b * ki for b, ki in zip(_DP_B4, k))
        if not np.all(np.isfinite(y5)):
            raise BlowUpError(
                f"hierarchy moment left the representable range near t = {t + h:.6g}",
                t + h,
            )
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err = math.sqrt(float(np.mean(((y5 - y4) / scale) ** 2)))
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** (-0.2))
            continue
        if np.any(y5 < 0.0):
            # positivity rejection: retry with half the step
            h *= 0.5
            continue
        t += h
        y = y5
        f = k[6]  # FSAL: the last stage is f(t + h, y5)
        if np.any(y > _BLOWUP):
            raise BlowUpError(f"hierarchy moment exceeded 1e300 at t = {t:.6g}", t)
        while next_rec < record_times.size and record_times[next_rec] <= t + 1e-12 * max(1.0, t):
            out[next_rec] = y
            next_rec += 1
        h *= min(5.0, max(0.2, 0.9 * (err + 1e-16) ** (-0.2)))
    return HierarchyTrajectory(times=record_times, m=out)


def chain_factor_log(q: int, log_m2: float, eps_q: float | None, use_eps: bool) -> float:
    """ln of C_q / C, where C_q = C m2(0) (1 + q(q-1) [eps_q] 2^(q-2)).

    The kernel's angular constant C cancels out of the max-chain ratio
    C_q / (C m0), so only log m2(0) and the combinatorial growth remain;
    the bracketed eps_q factor is included only in the eps variant.
    """
    if q < 1:
        raise ValueError("chain factor needs q >= 1")
    if q == 1:
        return log_m2
    amp = math.log(q * (q - 1)) + (q - 2) * _LN2
    if use_eps:
        if eps_q is None or not (0.0 < eps_q <= 1.0):
            raise ValueError("eps variant needs eps_q in (0, 1]")
        amp += math.log(eps_q)
    if amp < 30:
        return log_m2 + math.log1p(math.exp(amp))
    return log_m2 + amp


def log_uniform_bounds(
    log_m0_moments: np.ndarray,
    *,
    log_m0: float,
    log_m2: float,
    eps: np.ndarray | None = None,
    use_eps: bool = False,
) -> np.ndarray:
    """ln C*_q for q = 0..Q: the recursive max-chain uniform bound.

    C*_0 = m0(0), C*_1 = m2(0), and
    C*_q = max(m_{2q}(0), (C_q / (C m0(0))) * C*_{q-1}) with
    C_q = C m2(0) (1 + q(q-1) [eps_q] 2^(q-2)).
    """
    q_max = log_m0_moments.size - 1
    out = np.empty(q_max + 1)
    out[0] = log_m0
    if q_max >= 1:
        out[1] = log_m2
    for q in range(2, q_max + 1):
        eps_q = None if eps is None else float(eps[q])
        lr = chain_factor_log(q, log_m2, eps_q, use_eps) - log_m0
        out[q] = max(float(log_m0_moments[q]), lr + out[q - 1])
    return out


def uniform_bounds(
    m0_moments: np.ndarray,
    c_const: float,
    *,
    eps: np.ndarray | None = None,
    use_eps: bool = False,
) -> np.ndarray:
    """Time-uniform bounds C*_q on the hierarchy moments (plain scale).

    `m0_moments[q]` is the initial moment of order 2q; mass m0(0) must be
    positive.  Overflows to inf for very large Q; use log_uniform_bounds
    beyond roughly Q = 40.
    """
    m0_moments = np.asarray(m0_moments, dtype=float)
    if m0_moments[0] <= 0.0:
        raise ConfigError("uniform bounds require positive initial mass")
    if m0_moments.size < 2:
        return m0_moments.copy()
    with np.errstate(divide="ignore"):
        logs = log_uniform_bounds(
            np.log(m0_moments),
            log_m0=math.log(m0_moments[0]),
            log_m2=math.log(m0_moments[1]),
            eps=eps,
            use_eps=use_eps,
        )
    with np.errstate(over="ignore"):
        return np.exp(logs)


def derivative_bound(
    m0_moments: np.ndarray,
    c_const: float,
    q: int,
    *,
    eps: np.ndarray | None = None,
    use_eps: bool = False,
) -> float:
    """Uniform bound C_q C*_{q-1} on the derivative of the order-2q moment."""
    if q < 2:
        raise ValueError("derivative bound defined for q >= 2")
    m0_moments = np.asarray(m0_moments, dtype=float)
    if m0_moments[0] <= 0.0:
        raise ConfigError("derivative bound requires positive initial mass")
    if c_const == 0.0:
        return 0.0
    star = uniform_bounds(m0_moments[:q], c_const, eps=eps, use_eps=use_eps)
    eps_q = None if eps is None else float(eps[q])
    log_cq = math.log(c_const) + chain_factor_log(
        q, math.log(m0_moments[1]), eps_q, use_eps
    )
    with np.errstate(over="ignore"):
        return math.exp(log_cq + math.log(star[q - 1]))


def estimate_beta_sum_constant(a: float, p_max: int = 400) -> float:
    """Empirical constant for the Beta-weighted binomial sum decay.

    Returns twice the supremum over p in [3, p_max] of p^(1+a) S(p), where
    S(p) is the Beta-binomial sum; the doubling is a safety margin on top of
    the observed supremum.
    """
    if a <= 1.0:
        raise ValueError(f"index a must exceed 1, got {a}")
    sup = -math.inf
    for p in range(3, p_max + 1):
        val = (1.0 + a) * math.log(p) + log_binomial_beta_sum(a, p)
        sup = max(sup, val)
    return 2.0 * math.exp(sup)


@dataclass
class RecipeResult:
    """Outcome of the smallness recipe: cutoff index and certified rate."""

    q0: int
    log_alpha: float
    spec: MLSpec
    details: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        """Plain rate; underflows to 0.0 when the certified rate is tiny."""
        try:
            return math.exp(self.log_alpha)
        except OverflowError:
            return math.inf


def condition_rate_cap(a: float) -> float:
    """Rate cap from the partial-sum seed condition exp(alpha^a) <= 2."""
    return _LN2 ** (1.0 / a)


def rate_recipe(
    kernel: AngularKernel,
    s: float,
    alpha0: float,
    M0: float,
    log_initial_moments,
    *,
    q0_max: int = 200_000,
    use_eps_variant: bool = False,
    c_a: float | None = None,
) -> RecipeResult:
    """Choose the smallest admissible q0 and the largest certified rate.

    Conditions realized (A2 is the kernel's angular constant):
      1. exp(alpha^a) <= 2,
      2. 4 c_a q0^(2-a) eps_q0 M0^2 / (A2 m0) <= M0 / 2,
      3. alpha^a (c_q0 / (A2 m0) + c_q0 + m2 M0 / m0) <= M0 / 2,
    with c_q0 the max over q < q0 of the uniform moment and derivative
    bounds.  The certified rate is returned in log form; it is far below
    the double-precision floor for realistic singular kernels.

    `log_initial_moments` is either an array of ln m_{2q}(0) (q = 0..Q with
    Q >= q0 - 1) or a callable q_max -> such an array, invoked once q0 is
    known.  Upper bounds on the deep moments are acceptable inputs: they can
    only enlarge the max-chain, which keeps the certificate conservative.
    """
    a = 2.0 / s
    xi = kernels.classify_singularity(kernel)
    s_cap = 4.0 / (2.0 + xi)
    if s > s_cap + 1e-12:
        raise ConfigError(
            f"order s = {s:.6g} exceeds the admissible cap {s_cap:.6g} "
            f"for singularity index {xi:.3g}"
        )
    if a <= 1.0:
        raise ConfigError("the recipe covers s < 2 (index a = 2/s > 1) only")
    if M0 < 1.0:
        raise ConfigError("M0 bounds an exponential moment of a probability law; M0 >= 1")
    moments_of = log_initial_moments if callable(log_initial_moments) else None
    probe = moments_of(1) if moments_of else np.asarray(log_initial_moments, dtype=float)
    log_m0 = float(probe[0])
    log_m2 = float(probe[1])
    m0 = math.exp(log_m0)
    m2 = math.exp(log_m2)
    c_const = kernels.angular_constant(kernel)
    if c_const <= 0.0:
        raise ConfigError("recipe needs a kernel with positive angular constant")
    if c_a is None:
        c_a = a * estimate_beta_sum_constant(a)

    # Condition 2: threshold on q^(2-a) eps_q, met for all large q.
    threshold = c_const * m0 / (8.0 * c_a * M0)

    def weighted_eps(q: int) -> float:
        return q ** (2.0 - a) * kernels.cancellation_coefficient(kernel, q)

    q0 = _smallest_admissible_q(weighted_eps, threshold, q0_max)
    if q0 is None:
        raise ConfigError(
            f"no q0 <= {q0_max} satisfies the cancellation smallness condition "
            f"(threshold {threshold:.3e}); kernel too singular or M0 too large"
        )
    log_initial_moments = moments_of(q0 - 1) if moments_of else probe
    if len(log_initial_moments) < q0:
        raise ConfigError(
            f"recipe needs initial moments up to order {2 * (q0 - 1)} "
            f"(q0 = {q0}), got {len(log_initial_moments)} values"
        )

    eps_arr = None
    if use_eps_variant:
        eps_arr = np.zeros(q0)
        for q in range(2, q0):
            eps_arr[q] = kernels.cancellation_coefficient(kernel, q)

    # c_q0 = max over q = 1..q0-1 of {C*_q, C_q C*_{q-1}} (log domain).
    log_star = log_uniform_bounds(
        log_initial_moments[:q0],
        log_m0=log_m0,
        log_m2=log_m2,
        eps=eps_arr,
        use_eps=use_eps_variant,
    )
    log_cq0 = max(log_star[1:q0].max(), -math.inf)
    for q in range(2, q0):
        eps_q = None if eps_arr is None else float(eps_arr[q])
        log_cq = math.log(c_const) + chain_factor_log(q, log_m2, eps_q, use_eps_variant)
        log_cq0 = max(log_cq0, log_cq + log_star[q - 1])

    # Condition 3: alpha^a <= (M0/2) / (c_q0/(A2 m0) + c_q0 + m2 M0 / m0)
    log_denom = logsumexp(
        np.array(
            [
                log_cq0 - math.log(c_const) - log_m0,
                log_cq0,
                log_m2 + math.log(M0) - log_m0,
            ]
        )
    )
    log_alpha_c3 = (math.log(M0 / 2.0) - log_denom) / a
    log_alpha = min(math.log(alpha0), math.log(_LN2) / a, log_alpha_c3)
    spec = MLSpec(s=s, log_alpha=log_alpha)
    details = {
        "a": a,
        "c_a": c_a,
        "angular_constant": c_const,
        "condition2_threshold": threshold,
        "condition2_value": weighted_eps(q0),
        "log_c_q0": log_cq0,
        "log_alpha_condition3": log_alpha_c3,
        "rate_cap_condition1": condition_rate_cap(a),
        "alpha0": alpha0,
    }
    return RecipeResult(q0=q0, log_alpha=log_alpha, spec=spec, details=details)


def _smallest_admissible_q(weighted_eps, threshold: float, q0_max: int) -> int | None:
    """Smallest q0 >= 3 with weighted_eps(q0) <= threshold, None if absent.

    Scans a geometric grid, then refines by bisection assuming the sequence
    is eventually decreasing (it is, up to the resolution we care about).
    """
    q = 3
    prev = None
    while q <= q0_max:
        if weighted_eps(q) <= threshold:
            lo = prev if prev is not None else 3
            hi = q
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if weighted_eps(mid) <= threshold:
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = q
        q = max(q + 1, int(q * 1.35))
    return None


def partial_sum_along(trajectory: HierarchyTrajectory, spec: MLSpec) -> np.ndarray:
    """log E^Q(t) along a hierarchy trajectory (Q = trajectory order cap)."""
    from .moments import ml_partial_sum  # local import avoids a cycle

    out = np.empty(trajectory.times.size)
    for i in range(trajectory.times.size):
        with np.errstate(divide="ignore"):
            lm = np.log(trajectory.m[i])
        out[i] = ml_partial_sum(lm, spec)
    return out
