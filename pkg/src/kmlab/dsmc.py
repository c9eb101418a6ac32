"""Nanbu-style stochastic particle simulator for the spatially homogeneous
collision models.

Each step draws a random disjoint pairing of the ensemble; every pair
collides with probability dt * total_rate(kernel), with the angle drawn from
the normalized kernel density.  Maxwell-molecule rates are velocity
independent, so the per-pair Bernoulli draw is unbiased and conservation is
exact per collision.  A run owns a single seeded generator; identical
configurations reproduce identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import collisions, kernels, moments, quadrature
from .errors import ConfigError
from .kernels import AngularKernel
from .moments import MomentTable
from .special_fn import MLSpec, logsumexp

DEFAULT_N = 10_000
DEFAULT_MAX_COLLISION_PROB = 0.5
DEFAULT_MAX_ORDER = 16


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of axis-aligned Gaussian components."""

    weights: tuple[float, ...]
    means: tuple[tuple[float, ...], ...]
    sigmas: tuple[tuple[float, ...], ...]  # per-axis standard deviations

    def __post_init__(self):
        if len(self.weights) != len(self.means) or len(self.weights) != len(self.sigmas):
            raise ConfigError("mixture weights, means and sigmas must have equal length")
        if not self.weights or abs(sum(self.weights) - 1.0) > 1e-12:
            raise ConfigError("mixture weights must be nonempty and sum to 1")
        if any(w < 0 for w in self.weights):
            raise ConfigError("mixture weights must be nonnegative")
        if any(s <= 0 for sig in self.sigmas for s in sig):
            raise ConfigError("mixture sigmas must be positive")


@dataclass(frozen=True)
class UniformBall:
    """Uniform distribution on the centered ball of the given radius."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class PointMasses:
    """Discrete distribution on a finite list of velocities."""

    velocities: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.velocities:
            raise ConfigError("point-mass initial law needs at least one velocity")
        if self.weights is not None:
            if len(self.weights) != len(self.velocities):
                raise ConfigError("point-mass weights must match velocities")
            if abs(sum(self.weights) - 1.0) > 1e-12 or any(w < 0 for w in self.weights):
                raise ConfigError("point-mass weights must be nonnegative and sum to 1")


InitialLaw = GaussianMixture | UniformBall | PointMasses


def gaussian(sigma: float | Sequence[float], d: int, mean: Sequence[float] | None = None) -> GaussianMixture:
    """Single-component Gaussian initial law."""
    sig = tuple([float(sigma)] * d) if np.isscalar(sigma) else tuple(float(s) for s in sigma)
    mu = tuple([0.0] * d) if mean is None else tuple(float(m) for m in mean)
    return GaussianMixture(weights=(1.0,), means=(mu,), sigmas=(sig,))


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation scenario."""

    model: str  # kernels.KAC or kernels.BOLTZMANN
    d: int
    kernel: AngularKernel
    t_end: float
    n_particles: int = DEFAULT_N
    dt: float | None = None  # None: set from the rate rule at run start
    initial: InitialLaw = None
    seed: int = 1
    orders: tuple[int, ...] = (0, 2, 4)
    ml_specs: tuple[MLSpec, ...] = ()
    output_every: int = 1
    max_collision_prob: float = DEFAULT_MAX_COLLISION_PROB
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if self.model not in (kernels.KAC, kernels.BOLTZMANN):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model != self.kernel.family:
            raise ConfigError("kernel family must match the model")
        if self.d != self.kernel.d:
            raise ConfigError("kernel dimension must match the scenario dimension")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.n_particles < 2 or self.n_particles % 2:
            raise ConfigError("particle count must be even and >= 2")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.initial is None:
            object.__setattr__(self, "initial", gaussian(1.0, self.d))
        if not (0 < self.max_collision_prob <= 1.0):
            raise ConfigError("max collision probability must lie in (0, 1]")
        if self.output_every < 1:
            raise ConfigError("output cadence must be >= 1")
        for o in self.orders:
            if o % 2 or o < 0 or o > self.max_order:
                raise ConfigError(
                    f"diagnostic orders must be even in [0, {self.max_order}], got {o}"
                )


@dataclass
class ParticleEnsemble:
    """N weighted velocity samples standing in for the distribution f(t, .)."""

    velocities: np.ndarray  # (N, d)
    time: float
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return self.velocities.shape[0]

    @property
    def d(self) -> int:
        return self.velocities.shape[1]

    def kinetic_energy(self) -> float:
        return float(np.einsum("ij,ij->", self.velocities, self.velocities))

    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)


def sample_initial(initial: InitialLaw, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. velocities from the initial law."""
    if isinstance(initial, GaussianMixture):
        means = np.asarray(initial.means, dtype=float)
        sigmas = np.asarray(initial.sigmas, dtype=float)
        if means.shape[1] != d or sigmas.shape[1] != d:
            raise ConfigError("mixture component dimension does not match the scenario")
        comp = rng.choice(len(initial.weights), size=n, p=np.asarray(initial.weights))
        z = rng.standard_normal((n, d))
        return means[comp] + sigmas[comp] * z
    if isinstance(initial, UniformBall):
        # direction uniform on the sphere, radius from the d-ball profile
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = initial.radius * rng.random(n) ** (1.0 / d)
        return z * r[:, None]
    if isinstance(initial, PointMasses):
        vel = np.asarray(initial.velocities, dtype=float)
        if vel.shape[1] != d:
            raise ConfigError("point-mass dimension does not match the scenario")
        p = None if initial.weights is None else np.asarray(initial.weights)
        idx = rng.choice(len(vel), size=n, p=p)
        return vel[idx].copy()
    raise ConfigError(f"unsupported initial law {initial!r}")


def init_ensemble(config: ScenarioConfig, rng: np.random.Generator | None = None) -> ParticleEnsemble:
    """Initialize an ensemble from the scenario's initial law."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    v = sample_initial(config.initial, config.n_particles, config.d, rng)
    if not np.all(np.isfinite(v)):
        raise ConfigError("initial law produced non-finite velocities")
    return ParticleEnsemble(velocities=v, time=0.0, rng=rng)


def step(ensemble: ParticleEnsemble, kernel: AngularKernel, dt: float,
         rate: float | None = None) -> ParticleEnsemble:
    """Advance the ensemble by one collision step of length dt (in place).

    Pre: dt * total_rate(kernel) <= 1 (checked here; run() enforces the
    configured safety factor up front).
    """
    if rate is None:
        rate = kernels.total_rate(kernel)
    p = dt * rate
    if p > 1.0 + 1e-12:
        raise ConfigError(f"dt * total_rate = {p:.3g} exceeds 1; reduce dt")
    rng = ensemble.rng
    n = ensemble.n
    v = ensemble.velocities
    perm = rng.permutation(n)
    first = perm[: n // 2]
    second = perm[n // 2 :]
    hit = rng.random(n // 2) < p
    i = first[hit]
    j = second[hit]
    k = i.size
    if k:
        if kernel.family == kernels.KAC:
            theta = kernels.sample_angles(kernel, k, rng)
            v1, v2 = collisions.kac_collide(v[i, 0], v[j, 0], theta)
            v[i, 0] = v1
            v[j, 0] = v2
        else:
            theta, phi = kernels.sample_angles(kernel, k, rng)
            u = v[i] - v[j]
            norm = np.linalg.norm(u, axis=1)
            live = norm > 0.0  # coincident pairs are fixed points of the rule
            if live.any():
                iu, ju = i[live], j[live]
                u_hat = u[live] / norm[live, None]
                sigma = collisions.scattering_direction(u_hat, theta[live], phi[live])
                v1, v2 = collisions.boltzmann_collide(v[iu], v[ju], sigma)
                v[iu] = v1
                v[ju] = v2
    ensemble.time += dt
    return ensemble


def _diagnostic_columns(config: ScenarioConfig) -> list[str]:
    cols = [moments.poly_label(o) for o in config.orders]
    for spec in config.ml_specs:
        cols.append(moments.exp_label(spec))
        cols.append(moments.ml_label(spec))
    return cols


def _record(table: MomentTable, ens: ParticleEnsemble, config: ScenarioConfig):
    ests = [moments.poly_moment(ens.velocities, o) for o in config.orders]
    for spec in config.ml_specs:
        ests.append(moments.stretched_exp_moment(ens.velocities, spec))
        ests.append(moments.ml_moment(ens.velocities, spec))
    table.add_row(ens.time, ests)


def run(config: ScenarioConfig, ensemble: ParticleEnsemble | None = None,
        record_initial: bool = True) -> tuple[MomentTable, ParticleEnsemble]:
    """Run a scenario to t_end, recording diagnostics at the output cadence.

    Pass `ensemble` to continue from a restored snapshot; the moment table
    then continues from the ensemble's current time.
    """
    kernel = config.kernel
    rate = kernels.total_rate(kernel)
    dt = config.dt if config.dt is not None else config.max_collision_prob / rate
    if dt * rate > config.max_collision_prob * (1.0 + 1e-12):
        raise ConfigError(
            f"dt * total_rate = {dt * rate:.4g} exceeds the configured cap "
            f"{config.max_collision_prob}; reduce dt or truncate harder"
        )
    if ensemble is None:
        ensemble = init_ensemble(config)
    table = MomentTable(columns=_diagnostic_columns(config))
    if record_initial:
        _record(table, ensemble, config)
    t_target = config.t_end
    steps_done = 0
    while ensemble.time < t_target - 1e-12 * max(1.0, t_target):
        h = min(dt, t_target - ensemble.time)
        step(ensemble, kernel, h, rate)
        steps_done += 1
        if steps_done % config.output_every == 0 or ensemble.time >= t_target - 1e-12:
            _record(table, ensemble, config)
    return table, ensemble


# ---------------------------------------------------------------------------
# Analytic properties of the initial laws (used by the bound recipe)

def initial_log_even_moments(initial: InitialLaw, q_max: int, d: int) -> np.ndarray:
    """ln m_{2q}(0) for q = 0..q_max of the initial law (exact, log domain).

    Supported closed forms: centered isotropic Gaussian mixtures, uniform
    balls, and point masses.
    """
    qs = np.arange(q_max + 1)
    if isinstance(initial, PointMasses):
        vel = np.asarray(initial.velocities, dtype=float)
        w = (
            np.full(len(vel), 1.0 / len(vel))
            if initial.weights is None
            else np.asarray(initial.weights)
        )
        log_b2 = np.log1p(np.einsum("ij,ij->i", vel, vel))
        with np.errstate(divide="ignore"):
            log_w = np.log(w)
        return np.array([logsumexp(log_w + q * log_b2) for q in qs])
    if isinstance(initial, UniformBall):
        # radial density d r^(d-1)/R^d: E r^(2j) = d R^(2j) / (d + 2j)
        j = np.arange(q_max + 1, dtype=float)
        log_r2j = 2.0 * j * math.log(initial.radius) + math.log(d) - np.log(d + 2.0 * j)
        lg = np.array([math.lgamma(x + 1.0) for x in j])
        out = np.empty(q_max + 1)
        for q in range(q_max + 1):
            jj = np.arange(q + 1)
            log_binom = lg[q] - lg[jj] - lg[q - jj]
            out[q] = logsumexp(log_binom + log_r2j[jj])
        return out
    if isinstance(initial, GaussianMixture):
        for mu in initial.means:
            if any(m != 0.0 for m in mu):
                raise ConfigError("analytic moments require centered components")
        comp_logs = []
        for w, sig in zip(initial.weights, initial.sigmas):
            if len(set(sig)) != 1:
                raise ConfigError("analytic moments require isotropic components")
            comp_logs.append((w, _centered_gaussian_log_moments(sig[0], len(sig), q_max)))
        out = np.empty(q_max + 1)
        for q in qs:
            out[q] = logsumexp(
                np.array([math.log(w) + logs[q] for w, logs in comp_logs if w > 0])
            )
        return out
    raise ConfigError(f"unsupported initial law {initial!r}")


def _centered_gaussian_log_moments(sigma: float, d: int, q_max: int) -> np.ndarray:
    """ln E (1 + |X|^2)^q for X ~ N(0, sigma^2 I_d), q = 0..q_max.

    |X|^2 / sigma^2 is chi-square with d degrees of freedom:
    E |X|^{2j} = sigma^(2j) 2^j Gamma(j + d/2) / Gamma(d/2); binomial sum in
    the log domain keeps the result finite to very large q.
    """
    j = np.arange(q_max + 1, dtype=float)
    log_x2j = (
        2.0 * j * math.log(sigma)
        + j * math.log(2.0)
        + np.array([math.lgamma(jj + d / 2.0) - math.lgamma(d / 2.0) for jj in j])
    )
    out = np.empty(q_max + 1)
    lg = np.array([math.lgamma(x + 1.0) for x in j])
    for q in range(q_max + 1):
        jj = np.arange(q + 1)
        log_binom = lg[q] - lg[jj] - lg[q - jj]
        out[q] = logsumexp(log_binom + log_x2j[jj])
    return out


EXACT_MOMENT_CAP = 400


def initial_log_moment_bounds(initial: InitialLaw, q_max: int, d: int) -> np.ndarray:
    """ln m_{2q}(0) for q = 0..q_max: exact up to order 800, upper bounds beyond.

    Past the exact cap the cheap bound (1+x^2)^q <= 2^q (1 + x^(2q)) replaces
    the full binomial sum.  Upper bounds are valid inputs wherever the values
    feed the uniform-bound max-chain: they can only enlarge it.
    """
    exact_to = min(q_max, EXACT_MOMENT_CAP)
    out = np.empty(q_max + 1)
    out[: exact_to + 1] = initial_log_even_moments(initial, exact_to, d)
    if q_max <= EXACT_MOMENT_CAP:
        return out
    qs = np.arange(exact_to + 1, q_max + 1, dtype=float)
    if isinstance(initial, PointMasses):
        return initial_log_even_moments(initial, q_max, d)  # exact is O(n) anyway
    if isinstance(initial, UniformBall):
        out[exact_to + 1 :] = qs * math.log1p(initial.radius**2)
        return out
    if isinstance(initial, GaussianMixture):
        # E |X|^(2q) = sigma^(2q) 2^q Gamma(q + d/2) / Gamma(d/2) per component
        comp = []
        for w, sig in zip(initial.weights, initial.sigmas):
            if w <= 0:
                continue
            s0 = sig[0]
            lg = np.array([math.lgamma(q + d / 2.0) for q in qs]) - math.lgamma(d / 2.0)
            comp.append(math.log(w) + 2.0 * qs * math.log(s0) + qs * math.log(2.0) + lg)
        tail = np.logaddexp.reduce(np.vstack(comp), axis=0)
        out[exact_to + 1 :] = qs * math.log(2.0) + np.logaddexp(0.0, tail)
        return out
    raise ConfigError(f"unsupported initial law {initial!r}")


def initial_stretched_moment(initial: InitialLaw, spec: MLSpec, d: int) -> float:
    """Exact integral of exp(alpha <v>^s) against the initial law (quadrature).

    Supports d = 1 and radially representable laws in d >= 2.
    """
    la, s = spec.log_alpha, spec.s

    def weight(r2):
        return np.exp(np.exp(la + 0.5 * s * np.log1p(r2)))

    if isinstance(initial, PointMasses):
        vel = np.asarray(initial.velocities, dtype=float)
        w = (
            np.full(len(vel), 1.0 / len(vel))
            if initial.weights is None
            else np.asarray(initial.weights)
        )
        return float((w * weight(np.einsum("ij,ij->i", vel, vel))).sum())
    if isinstance(initial, UniformBall):
        R = initial.radius

        def f(r):
            return weight(r * r) * d * r ** (d - 1) / R**d

        return quadrature.integrate(f, 0.0, R, rel_tol=1e-11)
    if isinstance(initial, GaussianMixture):
        total = 0.0
        for w, mu, sig in zip(initial.weights, initial.means, initial.sigmas):
            if w == 0.0:
                continue
            if d == 1:
                m, s0 = mu[0], sig[0]

                def f(v):
                    z = (v - m) / s0
                    return weight(v * v) * np.exp(-0.5 * z * z) / (s0 * math.sqrt(2 * math.pi))

                lo, hi = m - 14 * s0, m + 14 * s0
                total += w * quadrature.integrate(f, lo, hi, rel_tol=1e-11,
                                                  points=(m - 2 * s0, m, m + 2 * s0))
            else:
                if any(x != 0.0 for x in mu) or len(set(sig)) != 1:
                    raise ConfigError(
                        "exact exponential moments in d >= 2 require centered "
                        "isotropic components"
                    )
                s0 = sig[0]
                sphere_area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)

                def f(r):
                    dens = (
                        sphere_area
                        * r ** (d - 1)
                        * np.exp(-0.5 * (r / s0) ** 2)
                        / ((2 * math.pi) ** (d / 2.0) * s0**d)
                    )
                    return weight(r * r) * dens

                total += w * quadrature.integrate(f, 0.0, 14 * s0, rel_tol=1e-11,
                                                  points=(s0, 3 * s0))
        return total
    raise ConfigError(f"unsupported initial law {initial!r}")
