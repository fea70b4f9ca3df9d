"""Propensity fields on the unit interval.

Four representations are supported: a constant rate, a point source
(Dirac mass), samples on a uniform grid, and a finite expansion in an
eigenbasis. All are immutable and expose the same small surface:
``evaluate``, ``total`` and the ``is_atomic`` flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatch
from .grid import trapezoid, uniform_grid


@dataclass(frozen=True)
class ConstantRate:
    value: float

    is_atomic = False

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"constant rate must be >= 0, got {self.value}")

    def evaluate(self, x):
        return np.full(np.shape(x), float(self.value))

    def total(self):
        return float(self.value)


@dataclass(frozen=True)
class DiracRate:
    """Point source ``mass * delta(x - location)``."""

    location: float
    mass: float

    is_atomic = True

    def __post_init__(self):
        if not 0.0 <= self.location <= 1.0:
            raise ValueError(f"Dirac location must lie in [0, 1], got {self.location}")
        if not self.mass >= 0:
            raise ValueError(f"Dirac mass must be >= 0, got {self.mass}")

    def evaluate(self, x):
        # pointwise density: zero off the atom, infinite on it
        x = np.asarray(x, dtype=float)
        return np.where(x == self.location, np.inf, 0.0)

    def total(self):
        return float(self.mass)


@dataclass(frozen=True, eq=False)
class TabulatedRate:
    """Rate samples on the uniform grid ``linspace(0, 1, len(values))``."""

    values: np.ndarray

    is_atomic = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("tabulated rate needs a 1-D array of at least 2 samples")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated rate samples must be finite and >= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid(self):
        return uniform_grid(self.values.size)

    def evaluate(self, x):
        return np.interp(x, self.grid, self.values)

    def total(self):
        return float(trapezoid(self.values))

    @classmethod
    def from_function(cls, func, m):
        return cls(func(uniform_grid(m)))

    @classmethod
    def from_csv(cls, path):
        """Read a two-column ``x,value`` CSV with header, sampled on a uniform grid."""
        with open(Path(path), newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        header, body = rows[0], rows[1:]
        if [h.strip() for h in header] != ["x", "value"]:
            raise ValueError(f"{path}: expected header 'x,value', got {header}")
        data = np.array([[float(a), float(b)] for a, b in body])
        x = data[:, 0]
        if not np.allclose(x, uniform_grid(x.size), atol=1e-9):
            raise GridMismatch(f"{path}: x column is not a uniform grid on [0, 1]")
        return cls(data[:, 1])


@dataclass(frozen=True, eq=False)
class SpectralRate:
    """Finite expansion ``sum_k coefficients[k] * xi_k`` in a given basis."""

    coefficients: np.ndarray
    basis: object = field(repr=False)

    is_atomic = False

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.size > self.basis.size:
            raise ValueError("more coefficients than basis functions")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def evaluate(self, x):
        k = self.coefficients.size
        return self.basis.evaluate(x, k) @ self.coefficients

    def total(self):
        k = self.coefficients.size
        return float(self.basis.integrals()[:k] @ self.coefficients)


RateField = ConstantRate | DiracRate | TabulatedRate | SpectralRate


def triangular_bump(location, width, m):
    """Unit-mass triangle of half-width ``width`` at ``location`` on an ``m``-point grid.

    Mass falling outside [0, 1] is folded back by mirror images at the
    walls, which is what the Neumann problem sees for a source near a
    boundary. The samples are rescaled so the trapezoid mass is exactly 1.
    """
    x = uniform_grid(m)
    h = x[1] - x[0]
    if width < 2 * h:
        raise ValueError(f"mollification width {width} unresolved by grid spacing {h}")
    bump = np.zeros(m)
    for image in (location, -location, 2.0 - location):
        bump += np.clip(1.0 - np.abs(x - image) / width, 0.0, None) / width
    return bump / trapezoid(bump)


def mollify(rate, width=1e-3, m=16001):
    """Replace a Dirac field by a tabulated triangular bump of the same mass."""
    if not rate.is_atomic:
        return rate
    return TabulatedRate(rate.mass * triangular_bump(rate.location, width, m))


def as_tabulated(rate, m):
    """Sample a non-atomic field on an ``m``-point grid."""
    if rate.is_atomic:
        raise ValueError("atomic fields cannot be sampled; mollify first")
    if isinstance(rate, TabulatedRate) and rate.values.size == m:
        return rate
    return TabulatedRate(rate.evaluate(uniform_grid(m)))
