"""Generating-function route to the CDME solution.

For a truncation of ``N`` eigenmodes, the generating function ``u_N(t, z)``
solves a linear parabolic equation on ``R^N`` whose Feynman-Kac
representation is an exponential functional of independent
Ornstein-Uhlenbeck processes. Its Gaussian average gives ``rho_0`` and its
``z``-derivatives give the projected n-particle densities. This module
evaluates all of these in closed form and provides the Monte Carlo
counterpart used to check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import assumption_two_residual
from .errors import AssumptionTwoViolated, IdentityViolated


def mode_relaxation(alphas, t):
    """``g_k(t) = (1 - e^{-alpha_k t}) / alpha_k``."""
    return -np.expm1(-alphas * t) / alphas


def integral_relaxation(alphas, t):
    """``int_0^t g_k(s) ds = t/alpha_k + (e^{-alpha_k t} - 1)/alpha_k^2``."""
    return (alphas * t + np.expm1(-alphas * t)) / alphas**2


def integral_relaxation_sq(alphas, t):
    """``int_0^t g_k(s)^2 ds``."""
    a = alphas
    return (t + 2 * np.expm1(-a * t) / a - np.expm1(-2 * a * t) / (2 * a)) / a**2


@dataclass(frozen=True, eq=False)
class GenSolution:
    """Truncated spectral data ``(c, d, alpha, gamma)`` and the evaluators built on it."""

    c: np.ndarray
    d: np.ndarray
    alphas: np.ndarray
    gamma: float
    basis: object = field(default=None, repr=False)
    assumption_two: bool = True

    @classmethod
    def from_projection(cls, proj, lambda_d=None, n_modes=None, tol=1e-10):
        """Truncate a :class:`~bdcdme.basis.SpectralProjection` to ``n_modes``.

        When ``lambda_d`` is given, records whether the retained modes span
        it exactly (the finite-support condition on the degradation rate).
        """
        n = proj.basis.size if n_modes is None else n_modes
        basis = proj.basis.truncated(n)
        holds = True
        if lambda_d is not None:
            resid = assumption_two_residual(lambda_d, basis, proj.d[:n])
            holds = abs(resid) <= tol * max(1.0, float(proj.d[:n] @ proj.d[:n]))
        return cls(proj.c[:n], proj.d[:n], basis.alphas, proj.gamma, basis, holds)

    @property
    def size(self):
        return self.alphas.size

    def g(self, t):
        return mode_relaxation(self.alphas, t)

    def u_closed_form(self, t, z):
        """``u_N(t, z)``; ``z`` has shape ``(..., N)``."""
        z = np.asarray(z, dtype=float)
        c, d, a = self.c, self.d, self.alphas
        const = -self.gamma * t + np.sum(
            c * (d - c) * integral_relaxation(a, t) + c**2 * a * integral_relaxation_sq(a, t)
        )
        return np.exp(const + z @ (c * self.g(t)))

    def gaussian_expectation(self, t):
        """``E[u_N(t, Z)]`` for standard normal ``Z``, via the Gaussian MGF."""
        c, d, a = self.c, self.d, self.alphas
        g = self.g(t)
        expo = -self.gamma * t + np.sum(
            c**2 * g**2 / 2 + c * (d - c) * integral_relaxation(a, t) + c**2 * a * integral_relaxation_sq(a, t)
        )
        return float(np.exp(expo))

    def _require_assumption_two(self):
        if not self.assumption_two:
            raise AssumptionTwoViolated("degradation rate is not spanned by the retained modes")

    def rho0_truncated(self, t):
        self._require_assumption_two()
        c, d, a = self.c, self.d, self.alphas
        linear = t * (np.sum(c * d / a) - self.gamma)
        return float(np.exp(linear + np.sum(c * d * np.expm1(-a * t) / a**2)))

    def rho_n_truncated(self, t, points, n_modes=None):
        """Projected n-particle density at ``points`` (last axis = particles)."""
        self._require_assumption_two()
        if self.basis is None:
            raise ValueError("evaluating densities needs the basis functions")
        k = self.size if n_modes is None else n_modes
        pts = np.asarray(points, dtype=float)
        n = pts.shape[-1]
        if n < 1:
            raise ValueError("need at least one position")
        amp = self.c[:k] * self.g(t)[:k]
        field_values = self.basis.evaluate(pts, k) @ amp
        return self.rho0_truncated(t) / math.factorial(n) * np.prod(field_values, axis=-1)

    def u_pde_residual(self, t, z, h=1e-4):
        """Central-difference residual of the ``u_N`` evolution equation at ``(t, z)``."""
        z = np.asarray(z, dtype=float)
        u = self.u_closed_form(t, z)
        u_t = (self.u_closed_form(t + h, z) - self.u_closed_form(t - h, z)) / (2 * h)
        rhs = (self.c @ z - self.gamma) * u
        for k in range(self.size):
            e = np.zeros(self.size)
            e[k] = h
            up, dn = self.u_closed_form(t, z + e), self.u_closed_form(t, z - e)
            rhs += self.alphas[k] * (up - 2 * u + dn) / h**2
            rhs += (self.d[k] - self.c[k] - self.alphas[k] * z[k]) * (up - dn) / (2 * h)
        return float(abs(u_t - rhs))

    def u_feynman_kac_mc(self, t, z, paths=100_000, dt=1e-2, seed=0, batches=1):
        """Monte Carlo estimate of ``u_N(t, z)`` from Ornstein-Uhlenbeck paths.

        Each mode follows ``dZ = (d - c - alpha Z) dt + sqrt(2 alpha) dW``,
        sampled with its exact Gaussian transition, so ``dt`` only sets
        the trapezoid quadrature of ``int_0^t (sum_k c_k Z_k - gamma) ds``.
        Batches draw from seeds derived from ``(seed, batch)`` and are
        reduced in batch order.

        Returns
        -------
        (estimate, standard_error)
        """
        if paths < 100:
            raise ValueError("need at least 100 paths")
        z = np.asarray(z, dtype=float)
        n_steps = max(int(math.ceil(t / dt - 1e-12)), 1)
        h = t / n_steps
        c, a = self.c, self.alphas
        mean = (self.d - c) / a
        decay = np.exp(-a * h)
        noise = np.sqrt(-np.expm1(-2 * a * h))

        sizes = [paths // batches + (b < paths % batches) for b in range(batches)]
        samples = []
        for b, size in enumerate(sizes):
            rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
            state = np.broadcast_to(z, (size, self.size)).copy()
            prev = state @ c
            acc = np.zeros(size)
            for _ in range(n_steps):
                state = mean + (state - mean) * decay + noise * rng.standard_normal(state.shape)
                cur = state @ c
                acc += 0.5 * h * (prev + cur)
                prev = cur
            samples.append(np.exp(acc - self.gamma * t))
        values = np.concatenate(samples)
        return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


@dataclass
class IdentityReport:
    g_identity_max: float
    g_identity_at: tuple
    gamma_identity: float
    g_tol: float = 1e-12
    gamma_tol: float = 1e-8

    @property
    def g_passed(self):
        return self.g_identity_max <= self.g_tol

    @property
    def gamma_passed(self):
        return self.gamma_identity <= self.gamma_tol

    @property
    def passed(self):
        return self.g_passed and self.gamma_passed

    def rows(self):
        """``(identity, max_deviation, location, passed)`` rows for CSV output."""
        k, t = self.g_identity_at
        return [
            ("g_identity", self.g_identity_max, f"k={k};t={t}", self.g_passed),
            ("gamma_identity", self.gamma_identity, "all", self.gamma_passed),
        ]


def identity_suite(gen, t_grid, strict=True, g_tol=1e-12, gamma_tol=1e-8):
    """Check the two algebraic identities behind the closed-form ``rho_0``.

    (a) ``g_k(t)^2/2 - int_0^t g_k + alpha_k int_0^t g_k^2 = 0`` for every mode
    and time; (b) ``sum_k c_k d_k / alpha_k = gamma``. With ``strict`` a
    violation raises :class:`IdentityViolated`; otherwise the report says so.
    """
    a = gen.alphas
    worst, where = 0.0, (1, 0.0)
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        dev = np.abs(
            mode_relaxation(a, t) ** 2 / 2 - integral_relaxation(a, t) + a * integral_relaxation_sq(a, t)
        )
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst, where = float(dev[k]), (k + 1, float(t))
    gamma_dev = float(abs(np.sum(gen.c * gen.d / a) - gen.gamma))
    report = IdentityReport(worst, where, gamma_dev, g_tol, gamma_tol)
    if strict:
        if not report.g_passed:
            raise IdentityViolated("g_identity", where[0], where[1], worst)
        if not report.gamma_passed:
            raise IdentityViolated("gamma_identity", "all", "all", gamma_dev)
    return report
