"""Exact pre/post collision velocity transforms.

All functions are vectorized: velocities may be single d-vectors or (n, d)
arrays (plain scalars for the 1-D model), and angles scalars or length-n
arrays.  Conservation identities hold to machine precision because the
transforms are evaluated in their exactly-conservative forms.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

_UNIT_TOL = 1e-12


def kac_collide(v, v_star, theta):
    """Rotate the velocity pair (v, v_star) by theta (1-D model collision).

    Returns (v cos t - v* sin t, v sin t + v* cos t); the pair energy
    v'^2 + v*'^2 equals v^2 + v*^2 exactly up to rounding.
    """
    c = np.cos(theta)
    s = np.sin(theta)
    return v * c - v_star * s, v * s + v_star * c


def boltzmann_collide(v, v_star, sigma):
    """Elastic collision parametrized by the post-collision direction sigma.

    v' = (v+v*)/2 + (|v-v*|/2) sigma and the star partner with -sigma.
    Momentum and energy are conserved; coincident velocities come back
    unchanged for any sigma (the relative speed is zero).
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    norms = np.linalg.norm(sigma, axis=-1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise ValueError("sigma must be a unit vector (|sigma| - 1 exceeds 1e-12)")
    center = 0.5 * (v + v_star)
    half_speed = 0.5 * np.linalg.norm(v - v_star, axis=-1)
    offset = half_speed[..., None] * sigma if v.ndim > 1 else half_speed * sigma
    return center + offset, center - offset


def scattering_direction(u_hat, theta, phi, d: int | None = None):
    """Unit vector sigma with u_hat . sigma = cos(theta).

    For d = 3 the azimuth phi picks the direction in the plane orthogonal to
    u_hat, using a deterministic frame: complete u_hat with the coordinate
    axis least aligned with it (lowest index on ties) via Gram-Schmidt.  For
    d = 2 phi must be 0 or pi and selects the side.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    single = u_hat.ndim == 1
    u = np.atleast_2d(u_hat)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), u.shape[0])
    phi = np.broadcast_to(np.asarray(phi, dtype=float), u.shape[0])
    if d is None:
        d = u.shape[1]
    if d not in (2, 3) or u.shape[1] != d:
        raise ConfigError(f"scattering directions support d in {{2, 3}}, got d={d}")

    if d == 2:
        if np.any(np.minimum(np.abs(phi), np.abs(phi - np.pi)) > 1e-9):
            raise ConfigError("for d = 2 the azimuth must be 0 or pi (side selector)")
        e1 = np.stack([-u[:, 1], u[:, 0]], axis=1)
        sigma = np.cos(theta)[:, None] * u + (np.sin(theta) * np.cos(phi))[:, None] * e1
    else:
        axis_idx = np.argmin(np.abs(u), axis=1)
        axis = np.zeros_like(u)
        axis[np.arange(u.shape[0]), axis_idx] = 1.0
        e1 = axis - (axis * u).sum(axis=1, keepdims=True) * u
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(u, e1)
        sigma = (
            np.cos(theta)[:, None] * u
            + (np.sin(theta) * np.cos(phi))[:, None] * e1
            + (np.sin(theta) * np.sin(phi))[:, None] * e2
        )
    return sigma[0] if single else sigma
