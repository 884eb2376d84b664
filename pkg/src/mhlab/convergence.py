"""Deterministic density evolution and the L1 / total variation bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import MHKernel, first_positive_order
from .measure_space import Density, l1_norm
from .spectral import apply_K, apply_K_hat, norm_pi, spectral_gap

DEFAULT_TV_TARGET = 1e-8


def _values(f) -> np.ndarray:
    return np.asarray(f.values if isinstance(f, Density) else f, dtype=float)


def evolve(f0: Density, k: MHKernel, n_steps: int) -> list[Density]:
    """``[f0, K_hat f0, ..., K_hat**n_steps f0]`` as probability densities."""
    if not isinstance(f0, Density) or not f0.probability:
        raise ValueError("evolve needs a probability density as its start")
    w = k.space.weights
    P = k.folded()
    mass = f0.values * w
    out = [f0]
    for _ in range(n_steps):
        mass = mass @ P
        out.append(Density(k.space, mass / w, probability=True))
    return out


def _mass_orbit(f, k: MHKernel, n_steps: int) -> np.ndarray:
    """Rows ``K_hat**j [f]`` for ``j = 0..n_steps``; ``f`` may be signed."""
    w = k.space.weights
    P = k.folded()
    out = np.empty((n_steps + 1, k.space.n_points))
    mass = _values(f) * w
    out[0] = mass
    for j in range(1, n_steps + 1):
        mass = mass @ P
        out[j] = mass
    return out / w[None, :]


@dataclass
class StepRecord:
    n: int
    tv: float
    l1: float
    l2pi_bound: float
    cauchy_inc: float


@dataclass
class ConvergenceReport:
    records: list[StepRecord]
    gamma: float
    nu: int | None
    metadata: dict = field(default_factory=dict)

    @property
    def tv(self) -> np.ndarray:
        return np.array([r.tv for r in self.records])

    @property
    def l1(self) -> np.ndarray:
        return np.array([r.l1 for r in self.records])

    @property
    def l2pi_bound(self) -> np.ndarray:
        return np.array([r.l2pi_bound for r in self.records])

    @property
    def cauchy_inc(self) -> np.ndarray:
        return np.array([r.cauchy_inc for r in self.records])

    def is_monotone(self, tol: float = 1e-12) -> bool:
        tv = self.tv
        return bool(np.all(np.diff(tv) <= tol))

    def sandwich_holds(self, tol: float = 1e-10) -> bool:
        return bool(np.all(self.l1 <= self.l2pi_bound + tol))

    def first_below(self, threshold: float):
        hits = np.nonzero(self.tv < threshold)[0]
        return int(hits[0]) if hits.size else None


def l2pi_bound_trace(f0, k: MHKernel, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """``(||K_hat**n f0 - gamma pi||_1, ||K**n [f0/pi] - gamma 1||_{2,pi})``.

    The second sequence is computed from ``f0/pi`` with the conjugate
    operator, independently of the first.
    """
    f = _values(f0)
    pi = k.pi
    gamma = float(f @ k.space.weights)
    densities = _mass_orbit(f, k, n_steps)
    l1 = np.abs(densities - gamma * pi[None, :]) @ k.space.weights
    P = k.folded()
    h = f / pi
    bound = np.empty(n_steps + 1)
    for n in range(n_steps + 1):
        if n:
            h = P @ h
        bound[n] = norm_pi(k.target, h - gamma)
    return l1, bound


def tv_trace(f0: Density, k: MHKernel, n_steps: int, nu_max: int = 10) -> ConvergenceReport:
    """Per-step distance of ``K_hat**n f0`` to the target, with its bounds."""
    if not f0.probability:
        raise ValueError("tv_trace needs a probability density")
    dens = _mass_orbit(f0, k, n_steps)
    l1, bound = l2pi_bound_trace(f0, k, n_steps)
    w = k.space.weights
    records = []
    for n in range(n_steps + 1):
        inc = float(np.abs(dens[n] - dens[n - 2]) @ w) if n >= 2 else math.nan
        records.append(StepRecord(n, 0.5 * float(np.abs(dens[n] - k.pi) @ w),
                                  float(l1[n]), float(bound[n]), inc))
    return ConvergenceReport(records, gamma=1.0, nu=first_positive_order(k, nu_max),
                             metadata={"deterministic": True})


def default_max_steps(k: MHKernel) -> int:
    gap = spectral_gap(k)
    if gap <= 0:
        raise ValueError("kernel has no spectral gap")
    return 10 * math.ceil(1.0 / gap)


def l1_embedding_check(target: Density, f) -> tuple[float, float]:
    """``(||f||_1, ||f/pi||_{2,pi})``; the first never exceeds the second."""
    f = _values(f)
    return l1_norm(f, target.space), norm_pi(target, f / target.values)


def nonexpansive_check(f, g, k: MHKernel, n: int) -> tuple[float, float]:
    """``(||K_hat**n f - K_hat**n g||_1, ||f - g||_1)``."""
    d = _values(f) - _values(g)
    return l1_norm(apply_K_hat(k, d, n), k.space), l1_norm(d, k.space)


@dataclass
class TruncationFamily:
    m: int
    mask: np.ndarray
    truncated: np.ndarray
    gamma: float
    gamma_m: float
    l1_residual: float
    mass_gap: float
    l2pi_norm: float
    l2pi_cap: float

    @property
    def mass_bound_holds(self) -> bool:
        return self.mass_gap <= self.l1_residual + 1e-12

    @property
    def l2pi_bound_holds(self) -> bool:
        return self.l2pi_norm <= self.l2pi_cap + 1e-12


def truncate(f, target: Density, m: int) -> TruncationFamily:
    """Restrict ``f`` to ``{pi >= 1/m}``.

    ``mass_gap`` is ``||gamma_m pi - gamma pi||_1``, and ``l2pi_cap`` the
    bound ``sup|f| * m`` on ``||f_[m]/pi||_{2,pi}``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    f = _values(f)
    space = target.space
    pi = target.values
    mask = pi >= 1.0 / m
    fm = np.where(mask, f, 0.0)
    gamma = float(f @ space.weights)
    gamma_m = float(fm @ space.weights)
    return TruncationFamily(
        m=m,
        mask=mask,
        truncated=fm,
        gamma=gamma,
        gamma_m=gamma_m,
        l1_residual=l1_norm(f - fm, space),
        mass_gap=l1_norm((gamma_m - gamma) * pi, space),
        l2pi_norm=norm_pi(target, fm / pi),
        l2pi_cap=float(np.max(np.abs(f))) * m,
    )


def bounded_cutoff(f, m: float) -> np.ndarray:
    """``f`` where ``|f| <= m``, zero elsewhere."""
    f = _values(f)
    return np.where(np.abs(f) <= m, f, 0.0)


@dataclass
class CauchyReport:
    l1_increments: np.ndarray
    l2pi_increments: np.ndarray

    def tail_max(self, burn_in: int = 0) -> float:
        return float(np.max(self.l1_increments[burn_in:]))

    def decay_ratio(self, burn_in: int = 2) -> float:
        inc = self.l1_increments[burn_in:]
        inc = inc[inc > 0]
        if inc.size < 2:
            return 0.0
        return float(np.median(inc[1:] / inc[:-1]))


def cauchy_check_even_powers(f, k: MHKernel, n_max: int) -> CauchyReport:
    """Increments between consecutive even powers, for ``n = 0..n_max-1``:
    ``||K_hat**(2n+2) f - K_hat**(2n) f||_1`` and the L2(pi) analogue
    ``||K**(2n+2)[f/pi] - K**(2n)[f/pi]||_{2,pi}``."""
    f = _values(f)
    dens = _mass_orbit(f, k, 2 * n_max)[::2]
    l1 = np.abs(np.diff(dens, axis=0)) @ k.space.weights
    P = k.folded()
    h = f / k.pi
    l2 = np.empty(n_max)
    for n in range(n_max):
        nxt = P @ (P @ h)
        l2[n] = norm_pi(k.target, nxt - h)
        h = nxt
    return CauchyReport(l1, l2)


@dataclass
class Decomposition:
    total: float
    drift: float
    truncated: float
    mass: float

    @property
    def bound(self) -> float:
        return self.drift + self.truncated + self.mass

    def holds(self, tol: float = 1e-10) -> bool:
        return self.total <= self.bound + tol

    def certifies(self, eps: float) -> bool:
        """All three addends below ``eps / 3``."""
        return max(self.drift, self.truncated, self.mass) < eps / 3.0


def truncation_decomposition_check(f0, k: MHKernel, m: int, n: int) -> Decomposition:
    """Split ``||K_hat**n f0 - gamma pi||_1`` through the truncation ``f0_[m]``
    into truncation drift, truncated convergence and mass mismatch."""
    f = _values(f0)
    tr = truncate(f, k.target, m)
    pi = k.pi
    space = k.space
    kf = apply_K_hat(k, f, n)
    kfm = apply_K_hat(k, tr.truncated, n)
    return Decomposition(
        total=l1_norm(kf - tr.gamma * pi, space),
        drift=l1_norm(kf - kfm, space),
        truncated=l1_norm(kfm - tr.gamma_m * pi, space),
        mass=tr.mass_gap,
    )


def cutoff_decomposition_check(f0, k: MHKernel, m: float, n: int) -> Decomposition:
    """Same split for the bounded cutoff ``f_m = f 1{|f| <= m}``; the drift and
    mass terms are each bounded by ``||f_m - f||_1``, reported in ``drift``
    and ``mass``."""
    f = _values(f0)
    fm = bounded_cutoff(f, m)
    space = k.space
    gamma = float(f @ space.weights)
    gamma_m = float(fm @ space.weights)
    residual = l1_norm(fm - f, space)
    return Decomposition(
        total=l1_norm(apply_K_hat(k, f, n) - gamma * k.pi, space),
        drift=residual,
        truncated=l1_norm(apply_K_hat(k, fm, n) - gamma_m * k.pi, space),
        mass=residual,
    )


def duality_residual(k: MHKernel, f, n: int) -> float:
    """Largest gap between ``K_hat**n f`` and ``pi * K**n [f/pi]``."""
    f = _values(f)
    return float(np.max(np.abs(apply_K_hat(k, f, n) - k.pi * apply_K(k, f / k.pi, n))))

