import math

import numpy as np
import pytest
from scipy import integrate as sci
from scipy import stats

from kmlab import kernels
from kmlab.errors import ConfigError
from kmlab.kernels import (
    AngularKernel,
    angular_constant,
    cancellation_coefficient,
    classify_singularity,
    decay_rate_table,
    sample_angle,
    sample_angles,
    sphere_measure,
    total_rate,
)

KAC_CONST = AngularKernel("kac", 1, "constant", level=1.0)
B3_CONST = AngularKernel("boltzmann", 3, "constant", level=1.0)
B2_CONST = AngularKernel("boltzmann", 2, "constant", level=1.0)


class TestKernelType:
    def test_validation(self):
        with pytest.raises(ConfigError):
            AngularKernel("kac", 2)
        with pytest.raises(ConfigError):
            AngularKernel("boltzmann", 1)
        with pytest.raises(ConfigError):
            AngularKernel("boltzmann", 4)
        with pytest.raises(ConfigError):
            AngularKernel("kac", 1, "power", nu=2.0)
        with pytest.raises(ConfigError):
            AngularKernel("kac", 1, theta_min=2.0)

    def test_profile_values(self):
        k = AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.1)
        assert k.b(0.05) == 0.0  # below truncation
        assert k.b(0.2) == pytest.approx(0.2**-2.0)
        assert k.b(-0.2) == k.b(0.2)

    def test_classification(self):
        assert classify_singularity(KAC_CONST) == 0.0
        assert classify_singularity(AngularKernel("kac", 1, "power", nu=1.0)) == 1.0
        assert classify_singularity(AngularKernel("boltzmann", 3, "power", nu=0.5)) == 0.5

    def test_sphere_measure(self):
        assert sphere_measure(0) == pytest.approx(2.0)
        assert sphere_measure(1) == pytest.approx(2 * math.pi)
        assert sphere_measure(2) == pytest.approx(4 * math.pi)


class TestAngularConstant:
    def test_kac_constant_profile(self):
        assert angular_constant(KAC_CONST) == pytest.approx(math.pi, abs=1e-10)

    def test_boltzmann_d3(self):
        assert angular_constant(B3_CONST) == pytest.approx(8 * math.pi / 3, abs=1e-10)

    def test_boltzmann_d2(self):
        assert angular_constant(B2_CONST) == pytest.approx(math.pi, abs=1e-10)

    def test_zero_level(self):
        assert angular_constant(AngularKernel("kac", 1, "constant", level=0.0)) == 0.0
        assert angular_constant(AngularKernel("boltzmann", 3, "constant", level=0.0)) == 0.0

    def test_power_untruncated_second_scheme(self):
        # independent oracle: scipy with explicit singular-endpoint weighting
        for nu in (0.3, 1.0, 1.7):
            k = AngularKernel("kac", 1, "power", nu=nu)
            ref, _ = sci.quad(
                lambda t: math.sin(2 * t) ** 2 * t ** (-1.0 - nu),
                0.0,
                math.pi,
                epsabs=1e-12,
                epsrel=1e-12,
                limit=300,
            )
            assert angular_constant(k) == pytest.approx(2 * ref, rel=1e-8)

    def test_linearity_in_level(self):
        for base in (KAC_CONST, B3_CONST,
                     AngularKernel("kac", 1, "power", nu=0.8, theta_min=0.1)):
            doubled = AngularKernel(base.family, base.d, base.profile,
                                    level=2.0 * base.level, nu=base.nu,
                                    theta_min=base.theta_min)
            assert angular_constant(doubled) == pytest.approx(
                2.0 * angular_constant(base), rel=1e-12
            )

    def test_truncation_converges_to_untruncated(self):
        k_full = AngularKernel("kac", 1, "power", nu=1.0)
        vals = [
            angular_constant(AngularKernel("kac", 1, "power", nu=1.0, theta_min=tm))
            for tm in (0.1, 0.01, 0.001)
        ]
        full = angular_constant(k_full)
        assert abs(vals[-1] - full) < abs(vals[0] - full)
        assert vals[-1] == pytest.approx(full, rel=1e-2)


class TestCancellation:
    def test_q2_is_one(self):
        for k in (KAC_CONST, B3_CONST, B2_CONST,
                  AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.05),
                  AngularKernel("boltzmann", 3, "power", nu=0.5, theta_min=0.05)):
            assert cancellation_coefficient(k, 2) == pytest.approx(1.0, abs=1e-10)

    def test_monte_carlo_oracle_kac(self, rng):
        # eps_10 for the constant kernel against brute 2-D Monte Carlo
        q = 10
        n = 10**7
        theta = rng.uniform(-math.pi, math.pi, n)
        t = rng.random(n)
        s2 = np.sin(2 * theta) ** 2
        f = s2 * t * (1 - 0.25 * t * s2) ** (q - 2)
        # eps = (2/C1) * 2 pi * E[f] with C1 = pi for the constant kernel
        est = 4.0 * f.mean()
        se = 4.0 * f.std(ddof=1) / math.sqrt(n)
        assert cancellation_coefficient(KAC_CONST, q) == pytest.approx(est, abs=3 * se)

    def test_monte_carlo_oracle_boltzmann(self, rng):
        q = 10
        n = 10**7
        theta = rng.uniform(0.0, math.pi, n)
        t = rng.random(n)
        s = np.sin(theta)
        f = s**3 * t * (1 - 0.5 * t * s * s) ** (q - 2)
        # eps = (2/C2) |S^1| pi E[f]; C2 = 8 pi / 3
        est = (2.0 / (8 * math.pi / 3)) * 2 * math.pi * math.pi * f.mean()
        se = (2.0 / (8 * math.pi / 3)) * 2 * math.pi**2 * f.std(ddof=1) / math.sqrt(n)
        assert cancellation_coefficient(B3_CONST, q) == pytest.approx(est, abs=3 * se)

    def test_fixed_quadrature_oracle(self):
        # 64-point inner rule as the independent evaluation of the t-integral
        tt, ww = np.polynomial.legendre.leggauss(64)
        tt = 0.5 * (tt + 1.0)
        ww = 0.5 * ww
        for q in (3, 7, 20, 101):
            def outer(theta, q=q):
                s2 = np.sin(2 * theta) ** 2
                inner = np.array([
                    float(np.dot(ww, tt * (1 - 0.25 * c * tt) ** (q - 2))) for c in s2
                ])
                return s2 * inner

            from kmlab import quadrature
            ref = (4.0 / math.pi) * quadrature.integrate(outer, 0.0, math.pi,
                                                          points=(math.pi / 2,))
            assert cancellation_coefficient(KAC_CONST, q) == pytest.approx(ref, rel=1e-9)

    def test_strictly_decreasing(self):
        for k in (KAC_CONST,
                  AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.3),
                  B3_CONST):
            eps = [cancellation_coefficient(k, q) for q in range(2, 201)]
            assert all(e1 > e2 for e1, e2 in zip(eps, eps[1:]))
            assert all(0.0 < e <= 1.0 + 1e-12 for e in eps)

    def test_spot_monotonicity(self):
        assert cancellation_coefficient(KAC_CONST, 20) < cancellation_coefficient(KAC_CONST, 10)


class TestDecayTable:
    def test_q2_row(self):
        for k, xi in ((KAC_CONST, 0.0),
                      (AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.3), 1.0)):
            rows = decay_rate_table(k, 5)
            q, eps, weighted = rows[0]
            assert q == 2
            assert eps == pytest.approx(1.0, abs=1e-10)
            assert weighted == pytest.approx(2 ** (1 - xi / 2), abs=1e-9)

    def test_weighted_column_eventually_decreasing(self):
        rows = decay_rate_table(KAC_CONST, 200)
        weighted = [r[2] for r in rows]
        tail = weighted[18:]  # q >= 20
        assert all(a > b for a, b in zip(tail, tail[1:]))
        assert tail[-1] < 0.5 * tail[0]

    def test_weighted_column_power_kernel(self):
        k = AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.3)
        rows = decay_rate_table(k, 200, q_min=20)
        weighted = [r[2] for r in rows]
        assert all(a > b for a, b in zip(weighted, weighted[1:]))
        assert weighted[-1] < 0.5 * weighted[0]


class TestTotalRate:
    def test_constant_kac(self):
        assert total_rate(KAC_CONST) == pytest.approx(2 * math.pi)

    def test_constant_boltzmann_d3(self):
        assert total_rate(B3_CONST) == pytest.approx(4 * math.pi)

    def test_truncated_power_analytic(self):
        k = AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.1)
        assert total_rate(k) == pytest.approx(2 * (10.0 - 1.0 / math.pi), rel=1e-12)

    def test_boltzmann_power_quadrature_oracle(self):
        k = AngularKernel("boltzmann", 3, "power", nu=0.5, theta_min=0.1)
        ref, _ = sci.quad(lambda t: t**-1.5 * math.sin(t), 0.1, math.pi, epsabs=1e-12)
        assert total_rate(k) == pytest.approx(2 * math.pi * ref, rel=1e-9)

    def test_untruncated_power_rejected(self):
        with pytest.raises(ConfigError):
            total_rate(AngularKernel("kac", 1, "power", nu=1.0))


class TestSampling:
    def test_kac_constant_uniform(self, rng):
        theta = sample_angles(KAC_CONST, 10**5, rng)
        assert theta.min() > -math.pi and theta.max() < math.pi
        stat, _ = stats.kstest(theta, stats.uniform(loc=-math.pi, scale=2 * math.pi).cdf)
        assert stat < 0.01

    def test_kac_sign_symmetry(self, rng):
        theta = sample_angles(KAC_CONST, 10**5, rng)
        # |theta| and sign are independent draws; the sign is a fair coin
        frac = (theta > 0).mean()
        assert abs(frac - 0.5) < 3 * 0.5 / math.sqrt(10**5)

    def test_kac_power_inverse_cdf(self, rng):
        k = AngularKernel("kac", 1, "power", nu=1.0, theta_min=0.01)
        n = 10**5
        theta = np.abs(sample_angles(k, n, rng))
        # empirical mean of sin^2(2 theta) against the quadrature value
        from kmlab import quadrature
        norm = total_rate(k) / 2.0
        ref = quadrature.integrate(
            lambda t: np.sin(2 * t) ** 2 * t**-2.0, 0.01, math.pi,
            points=quadrature.geometric_points(0.01, math.pi),
        ) / norm
        vals = np.sin(2 * theta) ** 2
        se = vals.std(ddof=1) / math.sqrt(n)
        assert vals.mean() == pytest.approx(ref, abs=3 * se)

    def test_boltzmann_d3_constant_cos_uniform(self, rng):
        theta, phi = sample_angles(B3_CONST, 10**5, rng)
        stat, _ = stats.kstest(np.cos(theta), stats.uniform(loc=-1.0, scale=2.0).cdf)
        assert stat < 0.01
        stat_phi, _ = stats.kstest(phi, stats.uniform(loc=0.0, scale=2 * math.pi).cdf)
        assert stat_phi < 0.01

    def test_boltzmann_power_chi2(self, rng):
        k = AngularKernel("boltzmann", 3, "power", nu=1.0, theta_min=0.2)
        n = 10**5
        theta, _ = sample_angles(k, n, rng)
        edges = np.linspace(0.2, math.pi, 25)
        counts, _ = np.histogram(theta, bins=edges)
        from kmlab import quadrature
        masses = np.array([
            quadrature.integrate(lambda t: t**-2.0 * np.sin(t), a, b, rel_tol=1e-11)
            for a, b in zip(edges[:-1], edges[1:])
        ])
        masses /= masses.sum()
        _, p_value = stats.chisquare(counts, n * masses)
        assert p_value > 0.001

    def test_kac_d2_side_choice(self, rng):
        theta, phi = sample_angles(B2_CONST, 2000, rng)
        assert set(np.unique(phi)) <= {0.0, math.pi}

    def test_untruncated_power_rejected(self, rng):
        with pytest.raises(ConfigError):
            sample_angles(AngularKernel("kac", 1, "power", nu=0.5), 10, rng)

    def test_scalar_wrapper(self, rng):
        th = sample_angle(KAC_CONST, rng)
        assert isinstance(th, float)
        th3, ph3 = sample_angle(B3_CONST, rng)
        assert 0.0 <= th3 <= math.pi and 0.0 <= ph3 < 2 * math.pi
