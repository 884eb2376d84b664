"""Operators of a Metropolis-Hastings kernel on L2(pi).

Two operators share the kernel:

* ``K`` acts on functions, ``K[f](x) = sum_x' k(x->x') f(x') w(x')``,
  i.e. ``P @ f`` with the folded matrix ``P``;
* ``K_hat`` pushes densities forward, ``K_hat[f] = ((f * w) @ P) / w``.

Powers are always applied by repeated matrix-vector products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .kernel import MHKernel, check_positivity_condition
from .measure_space import Density, SpaceMismatchError

GAP_TOL = 1e-8


class HypothesisError(RuntimeError):
    """The positivity condition needed for a conclusion does not hold."""


def _as_array(f, n: int) -> np.ndarray:
    if isinstance(f, Density):
        f = f.values
    a = np.asarray(f, dtype=float)
    if a.shape != (n,):
        raise SpaceMismatchError(f"expected a vector of length {n}, got shape {a.shape}")
    return a


def inner_product_pi(target: Density, f, g) -> float:
    """``<f, g>_pi = sum f g pi w``."""
    n = target.space.n_points
    f, g = _as_array(f, n), _as_array(g, n)
    return float(np.sum(f * g * target.values * target.space.weights))


def norm_pi(target: Density, f) -> float:
    return float(np.sqrt(max(inner_product_pi(target, f, f), 0.0)))


class Direction(Enum):
    CONJUGATE = "K"
    TRANSITION = "K_hat"


@dataclass(frozen=True, eq=False)
class OperatorView:
    """``K**power`` or ``K_hat**power`` for a fixed kernel."""

    kernel: MHKernel
    direction: Direction = Direction.CONJUGATE
    power: int = 1
    _P: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        object.__setattr__(self, "_P", self.kernel.folded())

    def __call__(self, f) -> np.ndarray:
        f = _as_array(f, self.kernel.space.n_points)
        P = self._P
        if self.direction is Direction.CONJUGATE:
            for _ in range(self.power):
                f = P @ f
            return f
        w = self.kernel.space.weights
        mass = f * w
        for _ in range(self.power):
            mass = mass @ P
        return mass / w


def apply_K(k: MHKernel, f, n: int = 1) -> np.ndarray:
    return OperatorView(k, Direction.CONJUGATE, n)(f)


def apply_K_hat(k: MHKernel, f, n: int = 1) -> np.ndarray:
    return OperatorView(k, Direction.TRANSITION, n)(f)


def K_orbit(k: MHKernel, f, n_max: int) -> np.ndarray:
    """Rows ``K**j [f]`` for ``j = 0..n_max``."""
    P = k.folded()
    out = np.empty((n_max + 1, k.space.n_points))
    out[0] = _as_array(f, k.space.n_points)
    for j in range(1, n_max + 1):
        out[j] = P @ out[j - 1]
    return out


def check_contraction(k: MHKernel, f) -> tuple[float, float]:
    """``(||K f||, ||f||)`` in L2(pi)."""
    return norm_pi(k.target, apply_K(k, f)), norm_pi(k.target, f)


def check_self_adjoint(k: MHKernel, f, g) -> float:
    lhs = inner_product_pi(k.target, apply_K(k, f), g)
    rhs = inner_product_pi(k.target, f, apply_K(k, g))
    return abs(lhs - rhs)


def quadratic_form_sequence(k: MHKernel, f, nu: int = 1, n_max: int = 50) -> np.ndarray:
    """``s_n = <K**(2 nu n) f, f>_pi`` for ``n = 0..n_max``.

    Evaluated as ``||K**(nu n) f||**2`` using self-adjointness, so each term
    is nonnegative by construction up to rounding.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    P = k.folded()
    g = _as_array(f, k.space.n_points)
    s = np.empty(n_max + 1)
    s[0] = inner_product_pi(k.target, g, g)
    for n in range(1, n_max + 1):
        for _ in range(nu):
            g = P @ g
        s[n] = inner_product_pi(k.target, g, g)
    return s


def spectrum(k: MHKernel) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and right eigenvectors of the folded matrix.

    Solved as the symmetric problem ``D**0.5 P D**-0.5`` with
    ``D = diag(pi * w)``; the returned vectors are mapped back to eigenfunctions
    of ``K`` and are orthonormal in L2(pi).
    """
    P = k.folded()
    d = np.sqrt(k.stationary_weights())
    S = d[:, None] * P / d[None, :]
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order] / d[:, None]


def spectral_gap(k: MHKernel) -> float:
    """One minus the second-largest eigenvalue modulus."""
    vals = spectrum(k)[0]
    return float(1.0 - np.max(np.abs(vals[1:])))


def operator_difference_norm(k: MHKernel, n: int, p: int, nu: int = 1) -> float:
    """Exact norm of ``K**(2 nu n) - K**(2 nu n + 2 nu p)`` from the spectrum."""
    mu = spectrum(k)[0]
    return float(np.max(np.abs(mu ** (2 * nu * n) - mu ** (2 * nu * (n + p)))))


def verify_operator_inequality(k: MHKernel, u, n: int = 1, p: int = 1, nu: int = 1,
                               exact: bool = False) -> tuple[float, float]:
    """Both sides of ``||T u||**2 <= ||T|| <T u, u>`` for
    ``T = K**(2 nu n) - K**(2 nu n + 2 nu p)``.

    ``||T||`` is the coarse bound 2 unless ``exact`` is set, in which case it
    comes from the spectrum.
    """
    if min(n, p, nu) < 1:
        raise ValueError("n, p and nu must be >= 1")
    a = apply_K(k, u, 2 * nu * n)
    Tu = a - apply_K(k, a, 2 * nu * p)
    t_norm = operator_difference_norm(k, n, p, nu) if exact else 2.0
    lhs = inner_product_pi(k.target, Tu, Tu)
    rhs = t_norm * inner_product_pi(k.target, Tu, u)
    return lhs, rhs


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    gap: float
    unit_multiplicity: int
    fixed_vector: np.ndarray
    constancy_spread: float
    positivity_holds: bool
    nu: int

    @property
    def simple(self) -> bool:
        return self.unit_multiplicity == 1


def fixed_point_constancy(k: MHKernel, nu: int = 1, diagnostic: bool = False) -> SpectralReport:
    """Check that the only fixed functions of ``K`` are constants.

    Refuses with :class:`HypothesisError` when the ``nu``-fold sub-kernel is
    not strictly positive, unless ``diagnostic`` is set, in which case the
    report is returned with ``positivity_holds=False``.
    """
    positive = check_positivity_condition(k, nu)
    if not positive and not diagnostic:
        raise HypothesisError(f"positivity condition fails for nu={nu}")
    vals, vecs = spectrum(k)
    mult = int(np.sum(vals >= 1.0 - GAP_TOL))
    v = vecs[:, 0]
    v = v * np.sign(v[np.argmax(np.abs(v))]) / norm_pi(k.target, v)
    return SpectralReport(
        eigenvalues=vals,
        gap=float(1.0 - np.max(np.abs(vals[1:]))),
        unit_multiplicity=mult,
        fixed_vector=v,
        constancy_spread=float(v.max() - v.min()),
        positivity_holds=positive,
        nu=nu,
    )


def strong_limit_trace(k: MHKernel, f, n_max: int) -> np.ndarray:
    """``e_n = ||K**n f - <f, 1>_pi 1||`` in L2(pi) for ``n = 0..n_max``."""
    f = _as_array(f, k.space.n_points)
    mean = inner_product_pi(k.target, f, np.ones_like(f))
    orbit = K_orbit(k, f, n_max)
    dev = orbit - mean
    return np.sqrt(np.maximum(
        (dev * dev) @ (k.target.values * k.space.weights), 0.0))
