"""Finite measure spaces and densities with respect to their weights.

A :class:`StateSpace` is a finite set of atoms, each carrying a strictly
positive mass. Continuous problems enter only through midpoint grids built by
:func:`build_grid_space`; the discretized problem is then treated as exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

NORMALIZATION_TOL = 1e-10


class SpaceMismatchError(ValueError):
    """Raised when two objects live on different state spaces."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Atoms with per-point measure ``weights``.

    ``coords`` is informational (grid midpoints, say) and never enters any
    computation except proposals that explicitly ask for a geometry.
    """

    weights: np.ndarray
    coords: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if w.size < 2:
            raise ValueError("a state space needs at least 2 points")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be strictly positive and finite")
        object.__setattr__(self, "weights", w)
        if self.coords is not None:
            c = _frozen(self.coords)
            if c.shape[0] != w.size:
                raise ValueError("coords length does not match weights")
            object.__setattr__(self, "coords", c)

    @property
    def n_points(self) -> int:
        return self.weights.size

    def positions(self) -> np.ndarray:
        """Coordinates if present, otherwise the point indices."""
        if self.coords is None:
            return np.arange(self.n_points, dtype=float)
        return self.coords

    def same_as(self, other: "StateSpace") -> bool:
        if self is other:
            return True
        return (self.n_points == other.n_points
                and np.array_equal(self.weights, other.weights))


def counting_space(n_points: int) -> StateSpace:
    """``n_points`` atoms of unit mass."""
    return StateSpace(np.ones(int(n_points)))


def build_grid_space(lower: float, upper: float, n_cells: int) -> StateSpace:
    """Midpoint discretization of ``[lower, upper]`` into equal cells."""
    if not (np.isfinite(lower) and np.isfinite(upper)):
        raise ValueError("grid bounds must be finite")
    if not lower < upper:
        raise ValueError("need lower < upper")
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError("n_cells must be an integer >= 2")
    n_cells = int(n_cells)
    width = (upper - lower) / n_cells
    mids = lower + width * (np.arange(n_cells) + 0.5)
    return StateSpace(np.full(n_cells, width), coords=mids)


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative function on a state space.

    With ``probability=True`` the total mass must be 1 within
    ``NORMALIZATION_TOL``; with ``strictly_positive=True`` every value must be
    positive, which is what a target density requires.
    """

    space: StateSpace
    values: np.ndarray
    probability: bool = False
    strictly_positive: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.space.n_points,):
            raise ValueError(
                f"density has shape {v.shape}, space has {self.space.n_points} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        if self.strictly_positive and np.any(v <= 0):
            raise ValueError("target must be strictly positive")
        if self.probability:
            mass = float(v @ self.space.weights)
            if abs(mass - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"probability density integrates to {mass!r}, not 1")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __sub__(self, other: "Density") -> np.ndarray:
        _check_same(self, other)
        return self.values - other.values


def _check_same(f: Density, g: Density) -> None:
    if not f.space.same_as(g.space):
        raise SpaceMismatchError("densities live on different state spaces")


def target_density(space: StateSpace, values) -> Density:
    """Normalize ``values`` and mark the result as a strictly positive target."""
    v = np.asarray(values, dtype=float)
    if v.shape == (space.n_points,) and np.any(v <= 0):
        raise ValueError("target must be strictly positive")
    f = normalize(Density(space, v))
    return Density(space, f.values, probability=True, strictly_positive=True)


def probability_density(space: StateSpace, values) -> Density:
    return Density(space, values, probability=True)


def point_mass(space: StateSpace, index: int) -> Density:
    """Probability density of the atom at ``index``."""
    v = np.zeros(space.n_points)
    v[index] = 1.0 / space.weights[index]
    return Density(space, v, probability=True)


def integrate(f, space: Optional[StateSpace] = None) -> float:
    """Sum of ``f * weights``; ``f`` may be a :class:`Density` or a raw array."""
    if isinstance(f, Density):
        return float(f.values @ f.space.weights)
    if space is None:
        raise TypeError("a raw array needs an explicit space")
    return float(np.asarray(f, dtype=float) @ space.weights)


def normalize(f: Density) -> Density:
    mass = integrate(f)
    if not np.isfinite(mass) or mass <= 0:
        raise ValueError(f"cannot normalize a function of total mass {mass!r}")
    return Density(f.space, f.values / mass, probability=True,
                   strictly_positive=f.strictly_positive)


def l1_norm(values, space: StateSpace) -> float:
    """Weighted L1 norm; ``values`` may be signed (differences of densities)."""
    v = np.asarray(values, dtype=float)
    return float(np.abs(v) @ space.weights)


def tv_distance(f: Density, g: Density) -> float:
    """Total variation distance: half the weighted L1 distance."""
    _check_same(f, g)
    return 0.5 * l1_norm(f.values - g.values, f.space)
