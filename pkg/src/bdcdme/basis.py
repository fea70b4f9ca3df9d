"""Neumann eigenpairs of ``-d^2/dx^2 + lambda_d`` on [0, 1] and spectral projections.

Two bases are available. :func:`build_cosine_basis` gives the closed-form
family for a constant degradation rate; :func:`build_numeric_basis`
discretises the operator for an arbitrary non-negative rate field.

Every basis is orthonormal in L2([0, 1]): the first cosine is 1 and the
others are ``sqrt(2) cos((k-1) pi x)``. Physical quantities only ever see
products ``c_k xi_k(x)``, so this normalisation is invisible downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import (
    AssumptionOneViolated,
    EigenSolverFailure,
    GridMismatch,
    NonPositiveDegradation,
)
from .grid import trapezoid_weights, uniform_grid
from .rates import ConstantRate, DiracRate, SpectralRate, TabulatedRate, as_tabulated

ANALYTIC_COSINE = "analytic_cosine"
NUMERIC_STURM_LIOUVILLE = "numeric_sturm_liouville"

# modes per block when forming (grid x modes) matrices
_BLOCK = 256


def cospi(y):
    """``cos(pi y)`` with exact values at multiples of 1/2."""
    r = np.mod(y, 2.0)
    out = np.cos(np.pi * r)
    out[(r == 0.5) | (r == 1.5)] = 0.0
    out[r == 1.0] = -1.0
    out[r == 0.0] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated orthonormal eigenbasis of the Neumann operator.

    Attributes
    ----------
    alphas
        The ``size`` smallest eigenvalues, increasing.
    kind
        ``"analytic_cosine"`` or ``"numeric_sturm_liouville"``.
    grid_size
        Number of points of the uniform grid used for quadrature (and, for
        numeric bases, the grid the eigenvectors live on).
    vectors
        Numeric bases only: eigenfunction samples, shape ``(grid_size, size)``.
    """

    alphas: np.ndarray
    kind: str
    grid_size: int
    vectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self):
        return self.alphas.size

    @property
    def grid(self):
        return uniform_grid(self.grid_size)

    def evaluate(self, x, k=None, exact=False):
        """Values ``xi_j(x)`` for ``j < k``; shape ``x.shape + (k,)``.

        With ``exact`` the cosine family returns exact zeros and signs at
        half-integer arguments (slower; used for point projections).
        """
        k = self.size if k is None else k
        x = np.asarray(x, dtype=float)
        if self.kind == ANALYTIC_COSINE:
            arg = x[..., None] * np.arange(k)
            out = np.sqrt(2.0) * (cospi(arg) if exact else np.cos(np.pi * arg))
            out[..., 0] = 1.0
            return out
        grid = self.grid
        flat = x.ravel()
        idx = np.clip(np.searchsorted(grid, flat) - 1, 0, self.grid_size - 2)
        frac = (flat - grid[idx]) / (grid[idx + 1] - grid[idx])
        vec = self.vectors[:, :k]
        out = vec[idx] * (1 - frac)[:, None] + vec[idx + 1] * frac[:, None]
        return out.reshape(x.shape + (k,))

    def values_on_grid(self, k=None):
        if self.kind == NUMERIC_STURM_LIOUVILLE:
            return self.vectors[:, : (self.size if k is None else k)]
        return self.evaluate(self.grid, k)

    def integrals(self):
        """``int_0^1 xi_k`` for every mode."""
        if self.kind == ANALYTIC_COSINE:
            out = np.zeros(self.size)
            out[0] = 1.0
            return out
        return trapezoid_weights(self.grid_size) @ self.vectors

    def bin_integrals(self, edges, k=None):
        """``int_{e_i}^{e_{i+1}} xi_k``; shape ``(len(edges) - 1, k)``."""
        k = self.size if k is None else k
        edges = np.asarray(edges, dtype=float)
        if self.kind == ANALYTIC_COSINE:
            modes = np.arange(1, k) * np.pi
            prim = np.empty((edges.size, k))
            prim[:, 0] = edges
            prim[:, 1:] = np.sqrt(2.0) * np.sin(np.outer(edges, modes)) / modes
            return np.diff(prim, axis=0)
        # cumulative trapezoid on the native grid, then interpolate
        grid = self.grid
        vec = self.vectors[:, :k]
        h = grid[1] - grid[0]
        cum = np.vstack([np.zeros(k), np.cumsum((vec[1:] + vec[:-1]) * h / 2, axis=0)])
        prim = np.stack([np.interp(edges, grid, cum[:, j]) for j in range(k)], axis=1)
        return np.diff(prim, axis=0)

    def gram(self, m=None):
        """Gram matrix by trapezoid quadrature on the stored (or given) grid."""
        m = self.grid_size if m is None else m
        if self.kind == NUMERIC_STURM_LIOUVILLE:
            vals = self.vectors
        else:
            vals = self.evaluate(uniform_grid(m))
        w = trapezoid_weights(vals.shape[0])
        return vals.T @ (vals * w[:, None])

    def truncated(self, k):
        vectors = None if self.vectors is None else self.vectors[:, :k]
        return EigenBasis(self.alphas[:k], self.kind, self.grid_size, vectors)

    def with_alphas(self, alphas):
        """Copy with replaced eigenvalues (used for negative-control checks)."""
        return EigenBasis(np.asarray(alphas, dtype=float), self.kind, self.grid_size, self.vectors)


def _constant_value(lambda_d):
    if isinstance(lambda_d, ConstantRate):
        return lambda_d.value
    if np.isscalar(lambda_d):
        return float(lambda_d)
    raise TypeError(f"cosine basis requires a constant degradation rate, got {lambda_d!r}")


def build_cosine_basis(lambda_d, n=1000, m=2001):
    """Closed-form basis for constant ``lambda_d``: ``alpha_k = (k-1)^2 pi^2 + lambda_d``."""
    value = _constant_value(lambda_d)
    if not value > 0:
        raise NonPositiveDegradation(f"degradation rate must be > 0, got {value}")
    if n < 1 or m < 2:
        raise ValueError("need n >= 1 and m >= 2")
    k = np.arange(n)
    alphas = k**2 * np.pi**2 + value
    return EigenBasis(alphas, ANALYTIC_COSINE, m)


def _sign_pivot(col):
    tiny = 1e-12 * np.abs(col).max()
    if abs(col[0]) > tiny:
        return col[0]
    return col[np.flatnonzero(np.abs(col) > tiny)[0]]


def build_numeric_basis(lambda_d, n, m=2001):
    """Smallest ``n`` eigenpairs of the ghost-point Neumann discretisation.

    The non-symmetric ghost-point matrix ``A`` is symmetrised as
    ``W^(1/2) A W^(-1/2)`` with ``W`` the trapezoid weights, so eigenvectors
    come out orthonormal in the trapezoid L2 inner product.
    """
    if n > m:
        raise ValueError(f"cannot extract {n} modes from a {m}-point grid")
    rate = as_tabulated(ConstantRate(lambda_d) if np.isscalar(lambda_d) else lambda_d, m)
    lam = rate.values
    if not np.any(lam > 0):
        raise AssumptionOneViolated("degradation rate is identically zero")
    h = 1.0 / (m - 1)
    diag = 2.0 / h**2 + lam
    off = np.full(m - 1, -1.0 / h**2)
    off[0] = off[-1] = -np.sqrt(2.0) / h**2
    try:
        alphas, y = eigh_tridiagonal(diag, off, select="i", select_range=(0, n - 1))
    except (LinAlgError, ValueError) as exc:
        raise EigenSolverFailure(str(exc)) from exc
    if alphas[0] <= 1e-12:
        raise AssumptionOneViolated(f"smallest eigenvalue {alphas[0]:.3e} is not positive")
    order = np.argsort(alphas)
    alphas, y = alphas[order], y[:, order]
    vectors = y / np.sqrt(trapezoid_weights(m))[:, None]
    for j in range(n):
        if _sign_pivot(vectors[:, j]) < 0:
            vectors[:, j] *= -1
    vectors.setflags(write=False)
    return EigenBasis(alphas, NUMERIC_STURM_LIOUVILLE, m, vectors)


def _tabulated_inner(values, basis):
    m = values.size
    w = trapezoid_weights(m) * values
    if basis.kind == NUMERIC_STURM_LIOUVILLE:
        if m != basis.grid_size:
            raise GridMismatch(f"tabulated field has {m} points, basis grid has {basis.grid_size}")
        return w @ basis.vectors
    x = uniform_grid(m)
    out = np.empty(basis.size)
    for start in range(0, basis.size, _BLOCK):
        stop = min(start + _BLOCK, basis.size)
        modes = np.arange(start, stop)
        block = np.sqrt(2.0) * np.cos(np.pi * np.outer(x, modes))
        if start == 0:
            block[:, 0] = 1.0
        out[start:stop] = w @ block
    return out


def project(rate, basis):
    """Coefficients ``<rate, xi_k>`` for every basis mode.

    Dirac fields are projected exactly (``mass * xi_k(location)``);
    tabulated ones by the trapezoid rule.
    """
    if isinstance(rate, DiracRate):
        return rate.mass * basis.evaluate(rate.location, exact=True)
    if isinstance(rate, ConstantRate):
        return rate.value * basis.integrals()
    if isinstance(rate, TabulatedRate):
        return _tabulated_inner(rate.values, basis)
    if isinstance(rate, SpectralRate):
        # all cosine bases share eigenfunctions, whatever the constant rate
        if rate.basis is basis or rate.basis.kind == basis.kind == ANALYTIC_COSINE:
            out = np.zeros(basis.size)
            k = min(rate.coefficients.size, basis.size)
            out[:k] = rate.coefficients[:k]
            return out
        return _tabulated_inner(rate.evaluate(basis.grid), basis)
    raise TypeError(f"unsupported rate field {rate!r}")


@dataclass(frozen=True, eq=False)
class SpectralProjection:
    c: np.ndarray
    d: np.ndarray
    gamma: float
    basis: EigenBasis = field(repr=False)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("total creation rate must be >= 0")


def spectral_projection(lambda_c, lambda_d, basis):
    return SpectralProjection(
        c=project(lambda_c, basis),
        d=project(lambda_d, basis),
        gamma=lambda_c.total(),
        basis=basis,
    )


def check_assumption_two(d, n0, tol=1e-10):
    """True iff the degradation coefficients vanish beyond mode ``n0``."""
    d = np.asarray(d, dtype=float)
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    return bool(np.all(np.abs(d[n0:]) <= tol))


def assumption_two_residual(lambda_d, basis, d=None):
    """``||lambda_d||^2 - sum_k d_k^2``: zero iff the truncation spans ``lambda_d``.

    Norms are taken with the trapezoid rule on the basis grid, which makes
    the comparison exact for both basis kinds.
    """
    d = project(lambda_d, basis) if d is None else d
    if isinstance(lambda_d, ConstantRate):
        norm2 = lambda_d.value**2
    elif isinstance(lambda_d, DiracRate):
        return np.inf
    else:
        vals = as_tabulated(lambda_d, basis.grid_size).values
        norm2 = trapezoid_weights(vals.size) @ vals**2
    return float(norm2 - d @ d)


def cosine_rate(mean, amplitude, m=2001):
    """Smooth field ``mean + amplitude * cos(pi x)`` as an exact two-mode expansion."""
    carrier = build_cosine_basis(1.0, 2, m)
    return SpectralRate([mean, amplitude / np.sqrt(2.0)], carrier)
