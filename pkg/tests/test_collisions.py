import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmlab.collisions import boltzmann_collide, kac_collide, scattering_direction
from kmlab.errors import ConfigError

finite = st.floats(-1e3, 1e3)
angles = st.floats(-math.pi, math.pi)


class TestKacCollide:
    def test_zero_angle_identity(self):
        assert kac_collide(1.3, -0.7, 0.0) == (1.3, -0.7)

    def test_quarter_rotation(self):
        vp, vps = kac_collide(3.0, 4.0, math.pi / 2)
        assert vp == pytest.approx(-4.0, abs=1e-15)
        assert vps == pytest.approx(3.0, abs=1e-15)

    def test_pi_sixth_example(self):
        vp, vps = kac_collide(1.0, 2.0, math.pi / 6)
        assert vp == pytest.approx(math.sqrt(3) / 2 - 1.0, rel=1e-14)
        assert vps == pytest.approx(0.5 + math.sqrt(3), rel=1e-14)
        assert vp**2 + vps**2 == pytest.approx(5.0, rel=1e-14)

    @given(finite, finite, angles)
    @settings(max_examples=300, deadline=None)
    def test_energy_conserved(self, v, vs, theta):
        vp, vps = kac_collide(v, vs, theta)
        e0 = v * v + vs * vs
        assert vp * vp + vps * vps == pytest.approx(e0, rel=1e-13, abs=1e-13)

    def test_momentum_not_conserved(self):
        vp, vps = kac_collide(1.0, 2.0, math.pi / 4)
        assert vp + vps != pytest.approx(3.0, abs=1e-6)

    @given(finite, finite, angles)
    @settings(max_examples=100, deadline=None)
    def test_rotation_inverse(self, v, vs, theta):
        vp, vps = kac_collide(*kac_collide(v, vs, theta), -theta)
        assert vp == pytest.approx(v, rel=1e-13, abs=1e-10)
        assert vps == pytest.approx(vs, rel=1e-13, abs=1e-10)

    def test_vectorized(self):
        v = np.array([1.0, 2.0])
        vs = np.array([0.5, -1.0])
        theta = np.array([0.3, -1.2])
        vp, vps = kac_collide(v, vs, theta)
        for i in range(2):
            a, b = kac_collide(float(v[i]), float(vs[i]), float(theta[i]))
            assert vp[i] == a and vps[i] == b


class TestBoltzmannCollide:
    def test_sigma_along_u_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        vs = np.array([0.0, -1.0, 1.0])
        u = v - vs
        sigma = u / np.linalg.norm(u)
        vp, vps = boltzmann_collide(v, vs, sigma)
        np.testing.assert_allclose(vp, v, atol=1e-14)
        np.testing.assert_allclose(vps, vs, atol=1e-14)

    def test_sigma_reversed_swaps(self):
        v = np.array([1.0, 2.0, 3.0])
        vs = np.array([0.0, -1.0, 1.0])
        u = v - vs
        sigma = -u / np.linalg.norm(u)
        vp, vps = boltzmann_collide(v, vs, sigma)
        np.testing.assert_allclose(vp, vs, atol=1e-14)
        np.testing.assert_allclose(vps, v, atol=1e-14)

    def test_head_on_d2(self):
        vp, vps = boltzmann_collide(
            np.array([1.0, 0.0]), np.array([-1.0, 0.0]), np.array([0.0, 1.0])
        )
        np.testing.assert_allclose(vp, [0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(vps, [0.0, -1.0], atol=1e-15)

    def test_degenerate_pair_unchanged(self):
        v = np.array([1.0, 1.0, 1.0])
        vp, vps = boltzmann_collide(v, v.copy(), np.array([0.0, 0.0, 1.0]))
        np.testing.assert_array_equal(vp, v)
        np.testing.assert_array_equal(vps, v)

    def test_non_unit_sigma_rejected(self):
        with pytest.raises(ValueError):
            boltzmann_collide(
                np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5])
            )

    def test_conservation_bulk(self, rng):
        n = 10000
        v = rng.standard_normal((n, 3)) * 3
        vs = rng.standard_normal((n, 3)) * 3
        sigma = rng.standard_normal((n, 3))
        sigma /= np.linalg.norm(sigma, axis=1, keepdims=True)
        vp, vps = boltzmann_collide(v, vs, sigma)
        p_err = np.abs((vp + vps) - (v + vs)).max()
        e0 = np.einsum("ij,ij->i", v, v) + np.einsum("ij,ij->i", vs, vs)
        e1 = np.einsum("ij,ij->i", vp, vp) + np.einsum("ij,ij->i", vps, vps)
        assert p_err < 1e-13 * np.abs(v + vs).max()
        assert np.max(np.abs(e1 - e0) / e0) < 1e-13

    def test_post_collision_relative_direction_is_sigma(self, rng):
        v = rng.standard_normal(3)
        vs = rng.standard_normal(3)
        sigma = rng.standard_normal(3)
        sigma /= np.linalg.norm(sigma)
        vp, vps = boltzmann_collide(v, vs, sigma)
        u_post = (vp - vps) / np.linalg.norm(vp - vps)
        np.testing.assert_allclose(u_post, sigma, atol=1e-13)
        # applying the rule to the post pair with the same sigma fixes it
        vpp, vpps = boltzmann_collide(vp, vps, sigma)
        np.testing.assert_allclose(vpp, vp, atol=1e-13)
        np.testing.assert_allclose(vpps, vps, atol=1e-13)


class TestScatteringDirection:
    def test_zero_angle(self, rng):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        np.testing.assert_allclose(scattering_direction(u, 0.0, 1.1), u, atol=1e-15)

    def test_pi_angle(self, rng):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        np.testing.assert_allclose(scattering_direction(u, math.pi, 0.3), -u, atol=1e-12)

    def test_canonical_frame_example(self):
        sigma = scattering_direction(np.array([0.0, 0.0, 1.0]), math.pi / 2, 0.0)
        np.testing.assert_allclose(sigma, [1.0, 0.0, 0.0], atol=1e-15)

    def test_cosine_identity(self, rng):
        for _ in range(200):
            u = rng.standard_normal(3)
            u /= np.linalg.norm(u)
            theta = rng.uniform(0, math.pi)
            phi = rng.uniform(0, 2 * math.pi)
            sigma = scattering_direction(u, theta, phi)
            assert np.linalg.norm(sigma) == pytest.approx(1.0, abs=1e-12)
            assert float(u @ sigma) == pytest.approx(math.cos(theta), abs=1e-12)

    def test_d2_sides(self):
        u = np.array([1.0, 0.0])
        s_plus = scattering_direction(u, math.pi / 3, 0.0)
        s_minus = scattering_direction(u, math.pi / 3, math.pi)
        assert s_plus[1] == pytest.approx(-s_minus[1])
        assert float(u @ s_plus) == pytest.approx(0.5, abs=1e-14)
        with pytest.raises(ConfigError):
            scattering_direction(u, 0.5, 1.0)  # azimuth must pick a side

    def test_unsupported_dimension(self):
        with pytest.raises(ConfigError):
            scattering_direction(np.array([1.0, 0, 0, 0]), 0.1, 0.0)
