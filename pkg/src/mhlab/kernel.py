"""Exact Metropolis-Hastings kernels on a finite state space.

The kernel is stored in its natural split: a sub-kernel density
``sub[x, x'] = min(q(x'|x), pi(x')/pi(x) * q(x|x'))`` with respect to the
space weights, plus a rejection mass ``phi[x]`` sitting on the diagonal atom.
Folding the atom in gives the row-stochastic matrix
``P = sub * weights[None, :] + diag(phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure_space import Density, SpaceMismatchError, StateSpace

ROW_TOL = 1e-8
MAX_DENSE_POINTS = 512


@dataclass(frozen=True, eq=False)
class ProposalFamily:
    """Conditional densities ``q[x, x'] = q(x'|x)`` w.r.t. the space weights."""

    space: StateSpace
    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        n = self.space.n_points
        if q.shape != (n, n):
            raise ValueError(f"proposal must be {n}x{n}, got {q.shape}")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValueError("proposal densities must be finite and nonnegative")
        rows = q @ self.space.weights
        bad = np.abs(rows - 1.0) > ROW_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(f"proposal row {i} integrates to {rows[i]!r}, not 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def step_masses(self) -> np.ndarray:
        """Probability of proposing each point: ``q(x'|x) * weight(x')``."""
        return self.q * self.space.weights[None, :]


def _row_normalized(space: StateSpace, raw: np.ndarray) -> ProposalFamily:
    raw = np.asarray(raw, dtype=float)
    return ProposalFamily(space, raw / (raw @ space.weights)[:, None])


def uniform_proposal(space: StateSpace) -> ProposalFamily:
    return _row_normalized(space, np.ones((space.n_points, space.n_points)))


def independence_proposal(target: Density) -> ProposalFamily:
    """Propose from the target itself, ignoring the current point."""
    n = target.space.n_points
    return ProposalFamily(target.space, np.tile(target.values, (n, 1)))


def random_walk_proposal(space: StateSpace, width: float) -> ProposalFamily:
    """Gaussian steps of standard deviation ``width`` over the space positions.

    Each row is renormalized on the finite space, so rows near the boundary
    are not symmetric; acceptance takes care of that. Point indices serve as
    positions on spaces without coordinates.
    """
    if not width > 0:
        raise ValueError("random-walk width must be positive")
    x = space.positions()
    d = (x[None, :] - x[:, None]) / width
    return _row_normalized(space, np.exp(-0.5 * d * d))


def table_proposal(space: StateSpace, table, normalize_rows: bool = False) -> ProposalFamily:
    if normalize_rows:
        return _row_normalized(space, table)
    return ProposalFamily(space, table)


def block_proposal(space: StateSpace, blocks) -> ProposalFamily:
    """Uniform proposals confined to each block of point indices."""
    raw = np.zeros((space.n_points, space.n_points))
    for block in blocks:
        idx = np.asarray(block, dtype=int)
        raw[np.ix_(idx, idx)] = 1.0
    if np.any(raw.sum(axis=1) == 0):
        raise ValueError("blocks must cover every point")
    return _row_normalized(space, raw)


def acceptance(pi, q, x: int, x_new: int) -> float:
    """Metropolis-Hastings acceptance probability for the move ``x -> x_new``.

    ``pi`` is a target (array or Density) and ``q`` a proposal matrix or
    :class:`ProposalFamily`. Moves with ``pi(x) q(x_new|x) == 0`` are accepted
    with probability 1 by convention.
    """
    pi = np.asarray(pi, dtype=float)
    q = q.q if isinstance(q, ProposalFamily) else np.asarray(q, dtype=float)
    denom = pi[x] * q[x, x_new]
    if denom == 0:
        return 1.0
    return min(1.0, pi[x_new] * q[x_new, x] / denom)


def acceptance_matrix(pi, q) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    q = q.q if isinstance(q, ProposalFamily) else np.asarray(q, dtype=float)
    fwd = pi[:, None] * q
    rev = fwd.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fwd > 0, rev / np.where(fwd > 0, fwd, 1.0), 1.0)
    return np.minimum(1.0, ratio)


@dataclass(frozen=True, eq=False)
class MHKernel:
    target: Density
    proposal: ProposalFamily
    sub_kernel: np.ndarray
    phi: np.ndarray

    @property
    def space(self) -> StateSpace:
        return self.target.space

    @property
    def pi(self) -> np.ndarray:
        return self.target.values

    def folded(self) -> np.ndarray:
        """Row-stochastic transition matrix with the rejection atom folded in."""
        P = self.sub_kernel * self.space.weights[None, :]
        P[np.diag_indices_from(P)] += self.phi
        return P

    def stationary_weights(self) -> np.ndarray:
        """Stationary probability mass of each atom, ``pi * weights``."""
        return self.pi * self.space.weights


def build_kernel(target: Density, proposal: ProposalFamily) -> MHKernel:
    if not target.space.same_as(proposal.space):
        raise SpaceMismatchError("target and proposal live on different spaces")
    pi = target.values
    if np.any(pi <= 0):
        raise ValueError("target must be strictly positive")
    q = proposal.q
    w = target.space.weights
    # min(q(x'|x), pi(x')/pi(x) q(x|x')); the diagonal reduces to q(x|x)
    sub = np.minimum(q, (pi[None, :] / pi[:, None]) * q.T)
    phi = 1.0 - sub @ w
    if np.any(phi < -ROW_TOL) or np.any(phi > 1 + ROW_TOL):
        i = int(np.argmax(np.abs(phi - 0.5)))
        raise ValueError(f"row closure fails at point {i}: rejection mass {phi[i]!r}")
    phi = np.clip(phi, 0.0, 1.0)
    sub.setflags(write=False)
    phi.setflags(write=False)
    return MHKernel(target, proposal, sub, phi)


def rejection_mass_direct(k: MHKernel) -> np.ndarray:
    """Rejection mass computed by integrating ``(1 - alpha) q`` directly."""
    alpha = acceptance_matrix(k.pi, k.proposal.q)
    return ((1.0 - alpha) * k.proposal.q) @ k.space.weights


def row_closure_residual(k: MHKernel) -> float:
    return float(np.max(np.abs(k.sub_kernel @ k.space.weights + k.phi - 1.0)))


def check_detailed_balance(k: MHKernel) -> float:
    """Largest ``|pi(x) sub(x->x') - pi(x') sub(x'->x)|`` over ``x != x'``."""
    flux = k.pi[:, None] * k.sub_kernel
    diff = np.abs(flux - flux.T)
    np.fill_diagonal(diff, 0.0)
    return float(diff.max())


def closed_form_residual(k: MHKernel) -> float:
    """Largest deviation of ``pi(x) sub(x->x')`` from
    ``min(pi(x) q(x'|x), pi(x') q(x|x'))`` off the diagonal."""
    fwd = k.pi[:, None] * k.proposal.q
    expected = np.minimum(fwd, fwd.T)
    diff = np.abs(k.pi[:, None] * k.sub_kernel - expected)
    np.fill_diagonal(diff, 0.0)
    return float(diff.max())


def stationarity_check(k: MHKernel) -> float:
    """Largest pointwise defect of ``pi`` under one transition step."""
    w = k.space.weights
    moved = (k.pi * w) @ k.sub_kernel + k.phi * k.pi
    return float(np.max(np.abs(moved - k.pi)))


@dataclass(frozen=True, eq=False)
class KernelPower:
    """The ``order``-step kernel of a base :class:`MHKernel`.

    ``transition`` is the folded row-stochastic matrix of the full n-step
    kernel; ``sub`` is the n-fold composition of the sub-kernel alone; ``atom``
    is ``phi**n``, the mass of staying put by n consecutive rejections.
    """

    base: MHKernel
    order: int
    transition: np.ndarray
    sub: np.ndarray
    atom: np.ndarray

    def density(self) -> np.ndarray:
        """Kernel density of the folded n-step kernel (atom included on the
        diagonal as mass / weight)."""
        return self.transition / self.base.space.weights[None, :]


def _check_dense(space: StateSpace) -> None:
    if space.n_points > MAX_DENSE_POINTS:
        raise ValueError(
            f"refusing to materialize kernel powers on {space.n_points} > "
            f"{MAX_DENSE_POINTS} points; apply operators to vectors instead")


def identity_power(k: MHKernel) -> KernelPower:
    n = k.space.n_points
    return KernelPower(k, 0, np.eye(n), np.zeros((n, n)), np.ones(n))


def first_power(k: MHKernel) -> KernelPower:
    return KernelPower(k, 1, k.folded(), np.array(k.sub_kernel), np.array(k.phi))


def compose(a: KernelPower, b: KernelPower) -> KernelPower:
    """Chapman-Kolmogorov composition of two powers of the same kernel."""
    if a.base is not b.base:
        raise ValueError("can only compose powers of the same base kernel")
    _check_dense(a.base.space)
    w = a.base.space.weights
    if a.order == 0:
        sub = np.array(b.sub)
    elif b.order == 0:
        sub = np.array(a.sub)
    else:
        sub = (a.sub * w[None, :]) @ b.sub
    return KernelPower(a.base, a.order + b.order, a.transition @ b.transition,
                       sub, a.atom * b.atom)


def kernel_power(k: MHKernel, n: int) -> KernelPower:
    if n < 0:
        raise ValueError("order must be nonnegative")
    result = identity_power(k)
    one = first_power(k)
    for _ in range(n):
        result = compose(result, one)
    return result


def power_detailed_balance(p: KernelPower) -> tuple[float, float]:
    """Detailed-balance residuals of the full n-step kernel and of the
    composed sub-kernel."""
    pi = p.base.pi
    full = pi[:, None] * p.density()
    sub = pi[:, None] * p.sub
    return float(np.abs(full - full.T).max()), float(np.abs(sub - sub.T).max())


def power_stationarity(p: KernelPower) -> float:
    mass = p.base.stationary_weights()
    return float(np.max(np.abs(mass @ p.transition - mass)))


def subkernel_power(k: MHKernel, n: int) -> np.ndarray:
    """n-fold composition of the sub-kernel, rejection atom excluded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    weighted = k.sub_kernel * k.space.weights[None, :]
    out = np.array(k.sub_kernel)
    for _ in range(n - 1):
        out = weighted @ out
    return out


def check_positivity_condition(k: MHKernel, nu: int) -> bool:
    """True when every entry of the ``nu``-fold sub-kernel is positive."""
    return bool(np.all(subkernel_power(k, nu) > 0))


def first_positive_order(k: MHKernel, nu_max: int = 10):
    """Smallest ``nu <= nu_max`` satisfying the positivity condition, else None."""
    weighted = k.sub_kernel * k.space.weights[None, :]
    cur = np.array(k.sub_kernel)
    for nu in range(1, nu_max + 1):
        if np.all(cur > 0):
            return nu
        cur = weighted @ cur
    return None
