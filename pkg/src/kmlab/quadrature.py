"""Globally adaptive Gauss-Legendre quadrature.

The integrators here accept vectorized integrands (ndarray of nodes in,
ndarray of values out).  `integrate` refines the panel with the largest
error estimate until the global estimate meets the tolerance;
`integrate_algebraic_endpoint` removes an algebraic singularity at the
left endpoint with a power substitution before handing off to
`integrate`.
"""

from __future__ import annotations

import heapq
import itertools
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import AccuracyError


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def fixed_panel(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    """n-point Gauss-Legendre approximation of the integral of f over [a, b]."""
    x, w = gauss_legendre(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.dot(w, np.asarray(f(mid + half * x), dtype=float)))


def _panel(f, a, b, n):
    coarse = fixed_panel(f, a, b, n)
    fine = fixed_panel(f, a, b, 2 * n + 1)
    return fine, abs(fine - coarse)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    abs_tol: float = 1e-10,
    rel_tol: float = 1e-9,
    points: Sequence[float] = (),
    n: int = 16,
    max_panels: int = 4096,
) -> float:
    """Integrate a vectorized integrand over [a, b].

    `points` lists interior break points (e.g. kinks or sharp peaks) used as
    the initial panel boundaries.  Raises AccuracyError if the panel budget is
    exhausted before the error estimate drops below
    max(abs_tol, rel_tol * |integral|).
    """
    if b <= a:
        return 0.0
    edges = sorted({a, b, *(p for p in points if a < p < b)})
    counter = itertools.count()
    heap = []
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _panel(f, lo, hi, n)
        total += val
        total_err += err
        heapq.heappush(heap, (-err, next(counter), lo, hi, val, err))
    panels = len(heap)
    while total_err > max(abs_tol, rel_tol * abs(total)):
        if panels >= max_panels:
            raise AccuracyError(
                f"quadrature did not converge: {panels} panels, "
                f"error estimate {total_err:.3e} for integral {total:.6e}"
            )
        _, _, lo, hi, val, err = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # Panel narrower than machine resolution; accept its estimate.
            heapq.heappush(heap, (0.0, next(counter), lo, hi, val, 0.0))
            total_err -= err
            continue
        lval, lerr = _panel(f, lo, mid, n)
        rval, rerr = _panel(f, mid, hi, n)
        total += lval + rval - val
        total_err += lerr + rerr - err
        heapq.heappush(heap, (-lerr, next(counter), lo, mid, lval, lerr))
        heapq.heappush(heap, (-rerr, next(counter), mid, hi, rval, rerr))
        panels += 1
    return total


def integrate_algebraic_endpoint(
    h: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    b: float,
    **kwargs,
) -> float:
    """Integrate theta^alpha * h(theta) over [0, b] for alpha > -1, h smooth.

    Substitutes theta = u^p with p = 2/(1+alpha) so the transformed integrand
    p * u * h(u^p) is regular at u = 0.
    """
    if alpha <= -1.0:
        raise ValueError(f"endpoint exponent must exceed -1, got {alpha}")
    p = 2.0 / (1.0 + alpha)

    def g(u):
        u = np.asarray(u, dtype=float)
        return p * u * h(u**p)

    return integrate(g, 0.0, b ** (1.0 / p), **kwargs)


def geometric_points(lo: float, hi: float, factor: float = 2.0) -> list[float]:
    """Geometric ladder of break points from lo toward hi (exclusive)."""
    pts = []
    x = lo * factor
    while x < hi:
        pts.append(x)
        x *= factor
    return pts
