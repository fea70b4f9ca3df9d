"""Uniform grids on [0, 1], trapezoid weights and snapshot schedules."""

import numpy as np


def uniform_grid(m):
    if m < 2:
        raise ValueError(f"grid needs at least 2 points, got {m}")
    return np.linspace(0.0, 1.0, m)


def trapezoid_weights(m):
    """Quadrature weights w such that ``w @ f`` is the trapezoid rule on [0, 1]."""
    h = 1.0 / (m - 1)
    w = np.full(m, h)
    w[0] = w[-1] = h / 2
    return w


def trapezoid(f, axis=-1):
    f = np.asarray(f, dtype=float)
    w = trapezoid_weights(f.shape[axis])
    return np.moveaxis(f, axis, -1) @ w


def snapshot_schedule(t_end, count=200, geometric_fraction=0.25, t_first=None):
    """Geometric-plus-linear time schedule covering ``[0, t_end]``.

    A geometric ramp resolves the initial transient, a linear tail covers
    the plateau. Returns ``count`` strictly increasing times starting at 0
    and ending at ``t_end``.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if count < 3:
        return np.linspace(0.0, t_end, max(count, 2))
    n_geo = max(int(round(count * geometric_fraction)), 1)
    n_lin = count - 1 - n_geo
    t_switch = 0.1 * t_end
    if t_first is None:
        t_first = 1e-4 * t_end
    geo = np.geomspace(t_first, t_switch, n_geo, endpoint=False)
    lin = np.linspace(t_switch, t_end, n_lin)
    return np.concatenate([[0.0], geo, lin])
