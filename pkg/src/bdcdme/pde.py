"""Reaction-diffusion intensity ``v(t, x)`` on [0, 1] with Neumann walls.

``v`` solves ``v_t = v_xx - lambda_d v + lambda_c`` from ``v(0, .) = 0``.
It is computed two independent ways: as an eigenfunction series
(:func:`solve_spectral`) and with a Crank-Nicolson finite-difference
stepper (:func:`solve_crank_nicolson`). :func:`pde_residual` checks either
one against the equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InsufficientSnapshots, LinearSolveFailure, MollificationRequired
from .grid import snapshot_schedule, trapezoid, uniform_grid
from .rates import as_tabulated

SPECTRAL = "spectral"
FINITE_DIFFERENCE = "finite_difference"

NEG_TOL = 1e-9


def relaxation(alphas, t):
    """``g_k(t) = (1 - exp(-alpha_k t)) / alpha_k``; shape ``t.shape + alphas.shape``."""
    t = np.asarray(t, dtype=float)[..., None]
    return -np.expm1(-alphas * t) / alphas


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Truncated series ``v(t, x) = sum_k c_k g_k(t) xi_k(x)``."""

    c: np.ndarray
    basis: object = field(repr=False)
    times: np.ndarray = field(repr=False)
    n_modes: int

    method = SPECTRAL

    @property
    def alphas(self):
        return self.basis.alphas[: self.n_modes]

    @cached_property
    def grid(self):
        return self.basis.grid

    def coefficients(self, t):
        """Mode amplitudes ``c_k g_k(t)``."""
        return self.c[: self.n_modes] * relaxation(self.alphas, t)

    def __call__(self, t, x):
        """Evaluate at scalar ``t``, array ``x``."""
        return self.basis.evaluate(x, self.n_modes) @ self.coefficients(t)

    def surface(self, times, x):
        """``v`` on the outer product ``times x x``; shape ``(len(times), len(x))``."""
        xi = self.basis.evaluate(np.asarray(x, dtype=float), self.n_modes)
        return self.coefficients(np.asarray(times, dtype=float)) @ xi.T

    def mass(self, t):
        return self.coefficients(t) @ self.basis.integrals()[: self.n_modes]

    def bin_masses(self, t, edges):
        """``int v(t, x) dx`` over each bin of ``edges``."""
        return self.basis.bin_integrals(edges, self.n_modes) @ self.coefficients(t)

    @cached_property
    def snapshots(self):
        return self.surface(self.times, self.grid)

    def truncated(self, n_modes):
        return SpectralSolution(self.c, self.basis, self.times, min(n_modes, self.basis.size))


def solve_spectral(proj, basis=None, t_end=4.0, snapshots=200, n_modes=None):
    """Build the series solution from a spectral projection."""
    basis = proj.basis if basis is None else basis
    n_modes = basis.size if n_modes is None else min(n_modes, basis.size)
    if n_modes < 1:
        raise ValueError("need at least one mode")
    return SpectralSolution(
        c=np.asarray(proj.c, dtype=float),
        basis=basis,
        times=snapshot_schedule(t_end, snapshots),
        n_modes=n_modes,
    )


@dataclass(frozen=True, eq=False)
class FiniteDifferenceSolution:
    """Snapshots of a grid solution. Evaluation interpolates linearly in ``t`` and ``x``."""

    times: np.ndarray
    grid: np.ndarray
    snapshots: np.ndarray = field(repr=False)
    dt: float
    steps: int

    method = FINITE_DIFFERENCE

    def _at(self, t):
        times = self.times
        if not times[0] <= t <= times[-1]:
            raise InsufficientSnapshots(f"t={t} outside stored range [{times[0]}, {times[-1]}]")
        i = np.searchsorted(times, t)
        if times[i] == t:
            return self.snapshots[i]
        w = (t - times[i - 1]) / (times[i] - times[i - 1])
        return (1 - w) * self.snapshots[i - 1] + w * self.snapshots[i]

    def __call__(self, t, x):
        return np.interp(x, self.grid, self._at(t))

    def surface(self, times, x):
        return np.stack([self(t, x) for t in np.atleast_1d(times)])

    def mass(self, t):
        if np.ndim(t):
            return np.array([trapezoid(self._at(s)) for s in t])
        return trapezoid(self._at(t))

    def bin_masses(self, t, edges):
        snap = self._at(t)
        h = self.grid[1] - self.grid[0]
        cum = np.concatenate([[0.0], np.cumsum((snap[1:] + snap[:-1]) * h / 2)])
        return np.diff(np.interp(edges, self.grid, cum))


def neumann_laplacian(m):
    """Second-difference matrix on ``m`` points with ghost-point Neumann rows."""
    h = 1.0 / (m - 1)
    main = np.full(m, -2.0)
    upper = np.ones(m - 1)
    lower = np.ones(m - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csc") / h**2


def solve_crank_nicolson(
    lambda_c,
    lambda_d,
    t_end=4.0,
    steps=4000,
    m=2001,
    snapshots=200,
    store_all=False,
    rannacher_steps=0,
):
    """Crank-Nicolson for ``v_t = v_xx - lambda_d v + lambda_c`` from rest.

    The first ``rannacher_steps`` steps are each replaced by two implicit
    Euler half-steps, which damps the stiff high modes excited by switching
    the source on at ``t = 0``. Snapshots are stored on the
    geometric-plus-linear schedule snapped to the step grid, or at every
    step when ``store_all`` is set.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if steps < 2 or m < 2:
        raise ValueError("need steps >= 2 and m >= 2")
    for rate in (lambda_c, lambda_d):
        if rate.is_atomic:
            raise MollificationRequired("Dirac fields must be mollified before finite differencing")
    x = uniform_grid(m)
    src = as_tabulated(lambda_c, m).values
    kill = as_tabulated(lambda_d, m).values
    dt = t_end / steps

    op = neumann_laplacian(m) - sp.diags(kill, format="csc")
    eye = sp.identity(m, format="csc")
    try:
        # (I - dt/2 L) serves both the CN step and the implicit half-step
        lu = splu((eye - 0.5 * dt * op).tocsc())
    except RuntimeError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    explicit = (eye + 0.5 * dt * op).tocsr()

    if store_all:
        keep = np.arange(steps + 1)
    else:
        sched = snapshot_schedule(t_end, snapshots)
        keep = np.unique(np.rint(sched / dt).astype(int))
    keep_set = {int(i): j for j, i in enumerate(keep)}
    out = np.empty((keep.size, m))

    v = np.zeros(m)
    if 0 in keep_set:
        out[keep_set[0]] = v
    for n in range(1, steps + 1):
        if n <= rannacher_steps:
            for _ in range(2):
                v = lu.solve(v + 0.5 * dt * src)
        else:
            v = lu.solve(explicit @ v + dt * src)
        if n in keep_set:
            out[keep_set[n]] = v
    if not np.all(np.isfinite(out)):
        raise LinearSolveFailure("non-finite values in finite-difference solution")
    return FiniteDifferenceSolution(keep * dt, x, out, dt, steps)


def _grid_residual(sol, lambda_c, lambda_d, t, x):
    times = sol.times
    if times.size < 3:
        raise InsufficientSnapshots("need at least three snapshots")
    i = int(np.argmin(np.abs(times - t)))
    if i == 0 or i == times.size - 1:
        raise InsufficientSnapshots(f"t={t} is not bracketed by stored snapshots")
    j = int(np.argmin(np.abs(sol.grid - x)))
    j = min(max(j, 1), sol.grid.size - 2)
    h1, h2 = times[i] - times[i - 1], times[i + 1] - times[i]
    f0, f1, f2 = sol.snapshots[i - 1 : i + 2, j]
    v_t = -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2
    hx = sol.grid[1] - sol.grid[0]
    row = sol.snapshots[i, j - 1 : j + 2]
    v_xx = (row[0] - 2 * row[1] + row[2]) / hx**2
    xj = sol.grid[j]
    return v_t, v_xx, row[1], xj


def pde_residual(sol, lambda_c, lambda_d, t, x, dt=1e-4, dx=1e-3):
    """``|v_t - v_xx + lambda_d v - lambda_c|`` by central differences.

    Series solutions are differenced directly with steps ``dt`` and ``dx``;
    grid solutions use 3-point stencils on their snapshot store at the
    nearest stored time and grid point.
    """
    if sol.method == SPECTRAL:
        if t <= 0:
            raise InsufficientSnapshots("residual needs t > 0")
        if not dx <= x <= 1 - dx:
            raise ValueError(f"x={x} too close to the boundary for step {dx}")
        v_t = (sol(t + dt, x) - sol(t - dt, x)) / (2 * dt)
        row = sol(t, np.array([x - dx, x, x + dx]))
        v_xx = (row[0] - 2 * row[1] + row[2]) / dx**2
        v = row[1]
    else:
        v_t, v_xx, v, x = _grid_residual(sol, lambda_c, lambda_d, t, x)
    src = float(lambda_c.evaluate(x))
    kill = float(lambda_d.evaluate(x))
    return float(abs(v_t - v_xx + kill * v - src))
