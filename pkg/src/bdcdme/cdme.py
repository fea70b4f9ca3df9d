"""Factorized solution of the birth-death CDME built from the intensity ``v``.

Given a solved intensity field ``v`` with mass ``m(t) = int v``, the
particle configuration at time ``t`` is a Poisson point process:

* ``rho_0(t) = exp(-m(t))``
* ``rho_n(t, x_1..x_n) = exp(-m(t)) v(t, x_1) ... v(t, x_n) / n!``

The n-particle densities are only ever evaluated pointwise; no tensor
over ``[0, 1]^n`` is formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import DegenerateTime, PositionOutOfDomain, UnsupportedOrder
from .grid import trapezoid_weights, uniform_grid
from .rates import DiracRate


def poisson_pmf(mean, n_max):
    """Poisson pmf on ``0..n_max`` computed in log space."""
    n = np.arange(n_max + 1)
    if mean == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    log_p = n * np.log(mean) - mean - np.array([math.lgamma(k + 1) for k in n])
    return np.exp(log_p)


@dataclass(frozen=True)
class CountDistribution:
    t: float
    mean: float
    pmf: np.ndarray
    tail: float

    @property
    def n_max(self):
        return self.pmf.size - 1


def rate_equation(c, d, t):
    """Well-mixed mean ``(c/d)(1 - exp(-d t))``."""
    return c / d * -np.expm1(-d * np.asarray(t, dtype=float))


def cme_reference(c, d, t, n):
    """Closed-form birth-death CME probability of ``n`` molecules at ``t``."""
    if not d > 0:
        raise ValueError("degradation constant must be > 0")
    mean = float(rate_equation(c, d, t))
    if mean == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mean) - mean - math.lgamma(n + 1))


def _check_points(points):
    pts = np.asarray(points, dtype=float)
    if np.any(pts < 0) or np.any(pts > 1):
        raise PositionOutOfDomain(f"positions must lie in [0, 1], got {pts}")
    return pts


class CdmeDistribution:
    """CDME state assembled from a :mod:`bdcdme.pde` solution."""

    def __init__(self, solution):
        self.solution = solution

    def mass(self, t):
        return self.solution.mass(t)

    def rho0(self, t):
        return np.exp(-self.mass(t))

    def rho_n(self, t, points):
        """Density of ``n = points.shape[-1]`` particles at ``points``.

        ``points`` may carry leading batch dimensions.
        """
        pts = _check_points(points)
        n = pts.shape[-1]
        if n < 1:
            raise ValueError("rho_n needs at least one position")
        # positions repeat a lot (quadrature columns, surfaces): evaluate each once
        uniq, inverse = np.unique(pts, return_inverse=True)
        v = self.solution(t, uniq)[inverse].reshape(pts.shape)
        return np.exp(-self.mass(t) - math.lgamma(n + 1)) * np.prod(v, axis=-1)

    def rho1_surface(self, times, x):
        """``rho_1`` on ``times x x``, shape ``(len(times), len(x))``."""
        times = np.asarray(times, dtype=float)
        v = self.solution.surface(times, x)
        return np.exp(-self.mass(times))[:, None] * v

    def rho2_surface(self, t, x1, x2):
        """``rho_2(t, x1_i, x2_j)`` on the outer grid, shape ``(len(x1), len(x2))``."""
        v1 = self.solution(t, _check_points(x1))
        v2 = self.solution(t, _check_points(x2))
        return np.exp(-self.mass(t)) * np.outer(v1, v2) / 2.0

    def count_pmf(self, t, n_max=50):
        mean = float(self.mass(t))
        return CountDistribution(t, mean, poisson_pmf(mean, n_max), float(poisson.sf(n_max, mean)))

    def conditional_density(self, t, x):
        """Position density of any one particle given the count: ``v / m``."""
        m = self.mass(t)
        if m <= 1e-14:
            raise DegenerateTime(f"particle mass {m:.3e} at t={t}; density undefined")
        return self.solution(t, np.asarray(x, dtype=float)) / m


def _rate_at(rate, x):
    return float(np.asarray(rate.evaluate(np.asarray(x, dtype=float))))


def _gain_integral(dist, lambda_d, t, pts, m_quad):
    """``int lambda_d(y) rho_{n+1}(t, pts, y) dy``."""
    if isinstance(lambda_d, DiracRate):
        return lambda_d.mass * dist.rho_n(t, np.append(pts, lambda_d.location))
    y = uniform_grid(m_quad)
    full = np.column_stack([np.broadcast_to(pts, (m_quad, pts.size)), y])
    return trapezoid_weights(m_quad) @ (lambda_d.evaluate(y) * dist.rho_n(t, full))


def _density(dist, t, pts):
    return dist.rho0(t) if pts.size == 0 else dist.rho_n(t, pts)


def cdme_residual(dist, lambda_c, lambda_d, n, t, points=(), dt=1e-4, dx=1e-3, m_quad=2001):
    """Absolute residual of the ``n``-th CDME equation at ``(t, points)``.

    Time and space derivatives are central differences with steps ``dt``
    and ``dx``; the degradation gain integral uses the trapezoid rule on
    ``m_quad`` points. Supported for ``n`` in 0..3.
    """
    if n not in (0, 1, 2, 3):
        raise UnsupportedOrder(f"residual implemented for n <= 3, got n={n}")
    if t <= dt:
        raise ValueError("residual needs t > dt")
    pts = _check_points(np.atleast_1d(np.asarray(points, dtype=float)))
    if pts.size != n:
        raise ValueError(f"expected {n} positions, got {pts.size}")
    if n and (pts.min() < dx or pts.max() > 1 - dx):
        raise ValueError("positions must stay at least dx away from the walls")

    here = _density(dist, t, pts)
    d_t = (_density(dist, t + dt, pts) - _density(dist, t - dt, pts)) / (2 * dt)

    rhs = (n + 1) * _gain_integral(dist, lambda_d, t, pts, m_quad)
    rhs -= lambda_c.total() * here
    for i in range(n):
        step = np.zeros(n)
        step[i] = dx
        rhs += (dist.rho_n(t, pts + step) - 2 * here + dist.rho_n(t, pts - step)) / dx**2
        rhs -= _rate_at(lambda_d, pts[i]) * here
        rhs += _rate_at(lambda_c, pts[i]) * _density(dist, t, np.delete(pts, i)) / n
    return float(abs(d_t - rhs))
