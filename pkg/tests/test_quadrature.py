import math

import numpy as np
import pytest
from scipy import integrate as sci

from kmlab import quadrature
from kmlab.errors import AccuracyError


def test_polynomial_exact():
    val = quadrature.integrate(lambda x: 3 * x**2, 0.0, 2.0)
    assert val == pytest.approx(8.0, abs=1e-12)


def test_smooth_against_scipy():
    f = lambda x: np.exp(-x) * np.sin(3 * x)
    ours = quadrature.integrate(f, 0.0, 10.0)
    ref, _ = sci.quad(lambda x: math.exp(-x) * math.sin(3 * x), 0.0, 10.0, epsabs=1e-13)
    assert ours == pytest.approx(ref, abs=1e-11)


def test_sharp_peak():
    f = lambda x: 1.0 / (1e-6 + (x - 0.37) ** 2)
    ours = quadrature.integrate(f, 0.0, 1.0, rel_tol=1e-10)
    ref, _ = sci.quad(lambda x: 1.0 / (1e-6 + (x - 0.37) ** 2), 0.0, 1.0,
                      points=[0.37], epsabs=1e-10, epsrel=1e-12, limit=200)
    assert ours == pytest.approx(ref, rel=1e-9)


def test_break_points_help_with_kinks():
    f = lambda x: np.abs(x - 0.5)
    val = quadrature.integrate(f, 0.0, 1.0, points=(0.5,))
    assert val == pytest.approx(0.25, abs=1e-13)


@pytest.mark.parametrize("alpha", [-0.9, -0.5, 0.0, 0.7])
def test_algebraic_endpoint(alpha):
    # integral of x^alpha over [0, 1] = 1/(1+alpha)
    val = quadrature.integrate_algebraic_endpoint(lambda x: np.ones_like(x), alpha, 1.0)
    assert val == pytest.approx(1.0 / (1.0 + alpha), rel=1e-10)


def test_algebraic_endpoint_with_smooth_factor():
    # integral of x^(-1/2) cos(x) over [0, pi/4], scipy weighted-oracle
    val = quadrature.integrate_algebraic_endpoint(np.cos, -0.5, math.pi / 4)
    ref, _ = sci.quad(lambda x: math.cos(x) / math.sqrt(x), 0.0, math.pi / 4,
                      epsabs=1e-13, epsrel=1e-13)
    assert val == pytest.approx(ref, rel=1e-10)


def test_empty_interval():
    assert quadrature.integrate(np.sin, 1.0, 1.0) == 0.0


def test_budget_exhaustion():
    # truly pathological integrand: white noise cannot converge
    rng = np.random.default_rng(0)
    f = lambda x: rng.standard_normal(np.shape(x))
    with pytest.raises(AccuracyError):
        quadrature.integrate(f, 0.0, 1.0, max_panels=8)


def test_geometric_points():
    pts = quadrature.geometric_points(0.1, 1.0)
    assert pts == [0.2, 0.4, 0.8]
