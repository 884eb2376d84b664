"""Monte Carlo Metropolis-Hastings chains on a finite state space.

Every step consumes exactly two uniforms: one for the proposal, drawn by
inverse CDF over the proposal row, and one for the accept/reject decision.
Replica ``r`` of an ensemble seeded with ``base_seed`` draws from
``SeedSequence(base_seed, spawn_key=(r,))`` feeding a PCG64 generator, so its
stream does not depend on how many replicas run alongside it.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .kernel import MHKernel, acceptance_matrix
from .measure_space import Density, tv_distance

STREAM_ALGORITHM = "numpy.random.PCG64 seeded by SeedSequence(base_seed, spawn_key=(replica,))"
ENVELOPE_C = 2.0


def replica_stream(base_seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(base_seed, spawn_key=(replica,))))


@dataclass(frozen=True)
class ChainState:
    point: int
    step: int = 0


class _StepTables:
    """Cumulative proposal masses and acceptance probabilities."""

    def __init__(self, k: MHKernel):
        masses = k.proposal.step_masses()
        cdf = np.cumsum(masses, axis=1)
        cdf /= cdf[:, -1:]
        self.cdf = cdf
        self.cdf_rows = [list(row) for row in cdf]
        self.alpha = acceptance_matrix(k.pi, k.proposal.q)
        self.alpha_rows = [list(row) for row in self.alpha]
        self.last = k.space.n_points - 1

    def propose(self, x: int, u: float) -> int:
        # strict less-than: boundary ties go to the higher index
        return min(bisect_right(self.cdf_rows[x], u), self.last)

    def propose_many(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        idx = np.sum(self.cdf[x] <= u[:, None], axis=1)
        return np.minimum(idx, self.last)


def mh_step(state: ChainState, k: MHKernel, rng: np.random.Generator,
            tables: _StepTables | None = None) -> ChainState:
    """One propose/accept step; a rejected move leaves the point unchanged."""
    tables = tables or _StepTables(k)
    u_prop, u_acc = rng.random(2)
    x = state.point
    cand = tables.propose(x, u_prop)
    if u_acc < tables.alpha_rows[x][cand]:
        x = cand
    return ChainState(x, state.step + 1)


def run_chain(k: MHKernel, x0: int, n_steps: int, seed: int) -> np.ndarray:
    """Path ``x_0..x_{n_steps}`` of a single chain."""
    tables = _StepTables(k)
    rng = replica_stream(seed, 0)
    path = np.empty(n_steps + 1, dtype=np.int64)
    path[0] = x = int(x0)
    block = 1 << 16
    done = 0
    cdf_rows, alpha_rows, last = tables.cdf_rows, tables.alpha_rows, tables.last
    while done < n_steps:
        m = min(block, n_steps - done)
        u = rng.random((m, 2)).tolist()
        for i, (u_prop, u_acc) in enumerate(u):
            cand = bisect_right(cdf_rows[x], u_prop)
            if cand > last:
                cand = last
            if u_acc < alpha_rows[x][cand]:
                x = cand
            path[done + i + 1] = x
        done += m
    return path


def transition_counts(path: np.ndarray, n_points: int) -> np.ndarray:
    counts = np.zeros((n_points, n_points), dtype=np.int64)
    np.add.at(counts, (path[:-1], path[1:]), 1)
    return counts


@dataclass
class EnsembleResult:
    counts: np.ndarray
    densities: list[Density]
    n_replicas: int
    base_seed: int
    final_points: np.ndarray
    metadata: dict = field(default_factory=dict)


def _draw_initial(f0: Density, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(f0.values * f0.space.weights)
    return np.minimum(np.searchsorted(cdf, u, side="right"), f0.space.n_points - 1)


def run_ensemble(f0: Density, k: MHKernel, n_steps: int, n_replicas: int,
                 base_seed: int) -> EnsembleResult:
    """Run ``n_replicas`` independent chains started from ``f0``.

    Returns per-step occupation counts and the empirical densities
    ``count / (n_replicas * weight)``.
    """
    if not f0.probability:
        raise ValueError("initial density must be a probability density")
    n = k.space.n_points
    u = np.empty((n_replicas, 1 + 2 * n_steps))
    for r in range(n_replicas):
        u[r] = replica_stream(base_seed, r).random(1 + 2 * n_steps)
    tables = _StepTables(k)
    x = _draw_initial(f0, u[:, 0])
    counts = np.empty((n_steps + 1, n), dtype=np.int64)
    counts[0] = np.bincount(x, minlength=n)
    for t in range(n_steps):
        cand = tables.propose_many(x, u[:, 1 + 2 * t])
        accept = u[:, 2 + 2 * t] < tables.alpha[x, cand]
        x = np.where(accept, cand, x)
        counts[t + 1] = np.bincount(x, minlength=n)
    w = k.space.weights
    dens = [Density(k.space, c / (n_replicas * w), probability=True) for c in counts]
    return EnsembleResult(counts, dens, n_replicas, base_seed, x,
                          metadata={"stream": STREAM_ALGORITHM})


def statistical_envelope(n_points: int, n_replicas: int, c: float = ENVELOPE_C) -> float:
    return c * float(np.sqrt(n_points / n_replicas))


@dataclass
class Discrepancy:
    tv: np.ndarray
    envelope: float

    @property
    def flagged(self) -> np.ndarray:
        return np.nonzero(self.tv > self.envelope)[0]


def empirical_vs_exact(ensemble: EnsembleResult, exact: list[Density]) -> Discrepancy:
    if len(exact) != len(ensemble.densities):
        raise ValueError("exact trace and ensemble have different lengths")
    tv = np.array([tv_distance(e, x) for e, x in zip(ensemble.densities, exact)])
    n_points = exact[0].space.n_points
    return Discrepancy(tv, statistical_envelope(n_points, ensemble.n_replicas))


def empirical_transition_matrix(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized transition frequencies and the visits per row."""
    visits = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = np.where(visits[:, None] > 0, counts / np.maximum(visits, 1)[:, None], 0.0)
    return freq, visits


def count_symmetry_zscores(counts: np.ndarray) -> np.ndarray:
    """``|c_ij - c_ji| / sqrt(c_ij + c_ji)`` for every pair with any traffic.

    Under stationarity and detailed balance the two directions are equally
    likely, so this is a standardized binomial deviation.
    """
    tot = counts + counts.T
    diff = np.abs(counts - counts.T).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(tot > 0, diff / np.sqrt(np.maximum(tot, 1)), 0.0)
    return z
