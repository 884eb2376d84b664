import numpy as np
import pytest

from mhlab.kernel import (ProposalFamily, acceptance, block_proposal, build_kernel,
                          check_detailed_balance, check_positivity_condition,
                          closed_form_residual, compose, first_positive_order, first_power,
                          identity_power, independence_proposal, kernel_power,
                          power_detailed_balance, power_stationarity, random_walk_proposal,
                          rejection_mass_direct, row_closure_residual, stationarity_check,
                          subkernel_power, table_proposal, uniform_proposal)
from mhlab.measure_space import StateSpace, build_grid_space, counting_space, target_density

from conftest import random_instance, random_kernel

FOLDED_2PT = np.array([[5 / 6, 1 / 6], [1 / 2, 1 / 2]])


def loop_kernel(pi, q):
    """Pairwise oracle: sub = alpha * q, phi = sum (1 - alpha) q w."""
    n = pi.space.n_points
    w = pi.space.weights
    sub = np.zeros((n, n))
    phi = np.zeros(n)
    for x in range(n):
        for y in range(n):
            a = acceptance(pi, q, x, y)
            sub[x, y] = a * q.q[x, y]
            phi[x] += (1 - a) * q.q[x, y] * w[y]
    return sub, phi


def test_acceptance_two_point(two_point):
    pi, q = two_point.target, two_point.proposal
    assert acceptance(pi, q, 0, 1) == pytest.approx(1 / 3, abs=1e-15)
    assert acceptance(pi, q, 1, 0) == 1.0


def test_acceptance_trivial_cases():
    s = counting_space(3)
    uni = target_density(s, [1, 1, 1])
    assert acceptance(uni, uniform_proposal(s), 0, 2) == 1.0
    pi = target_density(s, [0.2, 0.3, 0.5])
    ind = independence_proposal(pi)
    for x in range(3):
        for y in range(3):
            assert acceptance(pi, ind, x, y) == pytest.approx(1.0, abs=1e-15)


def test_acceptance_zero_branch():
    s = counting_space(2)
    pi = target_density(s, [0.5, 0.5])
    q = np.array([[1.0, 0.0], [0.5, 0.5]])
    assert acceptance(pi, q, 0, 1) == 1.0
    # reverse move has a zero reverse proposal, so it is always rejected
    assert acceptance(pi, q, 1, 0) == 0.0


def test_two_point_kernel(two_point):
    np.testing.assert_allclose(two_point.sub_kernel, [[0.5, 1 / 6], [0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(two_point.phi, [1 / 3, 0.0], atol=1e-15)
    np.testing.assert_allclose(two_point.folded(), FOLDED_2PT, atol=1e-15)


def test_independence_kernel_has_no_rejection():
    s = StateSpace([0.5, 1.0, 1.5, 2.0])
    pi = target_density(s, [4, 1, 2, 3])
    k = build_kernel(pi, independence_proposal(pi))
    np.testing.assert_allclose(k.sub_kernel, np.tile(pi.values, (4, 1)), atol=1e-15)
    np.testing.assert_allclose(k.phi, 0, atol=1e-15)


def test_uniform_target_symmetric_proposal():
    s = counting_space(5)
    pi = target_density(s, np.ones(5))
    raw = np.array([[abs(i - j) + 1.0 for j in range(5)] for i in range(5)])
    raw = raw / raw.sum(axis=1).max()
    raw[np.diag_indices(5)] += 1 - raw.sum(axis=1)
    q = ProposalFamily(s, raw)
    k = build_kernel(pi, q)
    np.testing.assert_allclose(k.sub_kernel, q.q, atol=1e-15)
    np.testing.assert_allclose(k.phi, 0, atol=1e-15)
    assert check_detailed_balance(k) == 0.0


def test_matches_pairwise_oracle(rng):
    for _ in range(30):
        pi, q = random_instance(rng, positive=bool(rng.integers(2)))
        k = build_kernel(pi, q)
        sub, phi = loop_kernel(pi, q)
        np.testing.assert_allclose(k.sub_kernel, sub, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(k.phi, phi, atol=1e-10)
        np.testing.assert_allclose(rejection_mass_direct(k), k.phi, atol=1e-10)


def test_kernel_invariants_random(rng):
    for _ in range(50):
        k = random_kernel(rng, positive=bool(rng.integers(2)))
        assert row_closure_residual(k) <= 1e-12
        assert check_detailed_balance(k) <= 1e-12
        assert closed_form_residual(k) <= 1e-12
        assert stationarity_check(k) <= 1e-12
        assert np.all(k.sub_kernel >= 0)
        assert np.all((k.phi >= 0) & (k.phi <= 1))


def test_two_point_balance_and_stationarity(two_point):
    assert 0.75 * two_point.sub_kernel[0, 1] == pytest.approx(0.125)
    assert 0.25 * two_point.sub_kernel[1, 0] == pytest.approx(0.125)
    assert check_detailed_balance(two_point) == 0.0
    assert stationarity_check(two_point) <= 1e-15
    np.testing.assert_allclose(np.array([0.75, 0.25]) @ FOLDED_2PT, [0.75, 0.25])


def test_independence_kernel_mixes_in_one_step():
    s = counting_space(4)
    pi = target_density(s, [0.1, 0.2, 0.3, 0.4])
    k = build_kernel(pi, independence_proposal(pi))
    f = np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(f @ k.folded(), pi.values, atol=1e-15)


def test_malformed_proposal_rejected():
    s = counting_space(2)
    with pytest.raises(ValueError):
        ProposalFamily(s, [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError):
        ProposalFamily(s, [[1.5, -0.5], [0.5, 0.5]])
    with pytest.raises(ValueError):
        build_kernel(target_density(counting_space(3), [1, 1, 1]), uniform_proposal(s))


def test_compose_matches_matrix_power(two_point):
    k1 = first_power(two_point)
    k2 = compose(k1, k1)
    np.testing.assert_allclose(k2.transition, FOLDED_2PT @ FOLDED_2PT, atol=1e-15)
    np.testing.assert_allclose(k2.transition, [[7 / 9, 2 / 9], [2 / 3, 1 / 3]], atol=1e-15)
    ident = identity_power(two_point)
    np.testing.assert_array_equal(compose(ident, k1).transition, k1.transition)
    np.testing.assert_array_equal(compose(k1, ident).sub, k1.sub)


def test_compose_random(rng):
    for _ in range(10):
        k = random_kernel(rng, n=int(rng.integers(2, 20)))
        P = k.folded()
        for m, n in [(1, 2), (3, 4), (2, 5)]:
            a, b = kernel_power(k, m), kernel_power(k, n)
            ab, ba = compose(a, b), compose(b, a)
            np.testing.assert_allclose(ab.transition, np.linalg.matrix_power(P, m + n), atol=1e-10)
            np.testing.assert_allclose(ab.transition, ba.transition, atol=1e-12)
            np.testing.assert_allclose(ab.sub, subkernel_power(k, m + n), rtol=1e-10, atol=1e-12)
            full, sub = power_detailed_balance(ab)
            assert full <= 1e-10 and sub <= 1e-10
            assert power_stationarity(ab) <= 1e-10
            np.testing.assert_allclose(ab.atom, k.phi ** (m + n))


def test_compose_rejects_foreign_kernel(two_point, rng):
    other = random_kernel(rng, n=2)
    with pytest.raises(ValueError):
        compose(first_power(two_point), first_power(other))


def test_subkernel_power_two_point(two_point):
    np.testing.assert_array_equal(subkernel_power(two_point, 1), two_point.sub_kernel)
    s2 = subkernel_power(two_point, 2)
    # explicit double sum over z with unit weights
    s = two_point.sub_kernel
    oracle = np.array([[sum(s[i, z] * s[z, j] for z in range(2)) for j in range(2)]
                       for i in range(2)])
    np.testing.assert_allclose(s2, oracle)
    assert s2[0, 0] == pytest.approx(1 / 3)


def test_positivity_condition(two_point, disconnected, rng):
    assert check_positivity_condition(two_point, 1)
    for nu in range(1, 11):
        assert not check_positivity_condition(disconnected, nu)
    assert first_positive_order(disconnected) is None
    k = random_kernel(rng, n=10)
    assert check_positivity_condition(k, 1)
    assert check_positivity_condition(k, 2)


def test_positivity_needs_several_steps():
    # nearest-neighbour walk on a path graph of 5 points: sub-kernel power
    # becomes positive once every pair is reachable
    s = counting_space(5)
    raw = np.eye(5) + np.eye(5, k=1) + np.eye(5, k=-1)
    k = build_kernel(target_density(s, [1, 2, 3, 2, 1]), table_proposal(s, raw, normalize_rows=True))
    assert not check_positivity_condition(k, 3)
    assert check_positivity_condition(k, 4)
    assert first_positive_order(k) == 4


def test_grid_random_walk_is_positive(grid_gaussian):
    assert check_positivity_condition(grid_gaussian, 1)
    assert row_closure_residual(grid_gaussian) <= 1e-12


def test_block_proposal_requires_cover():
    with pytest.raises(ValueError):
        block_proposal(counting_space(3), [[0, 1]])


def test_kernel_power_refuses_large_spaces():
    s = build_grid_space(0, 1, 600)
    pi = target_density(s, np.ones(600))
    k = build_kernel(pi, uniform_proposal(s))
    with pytest.raises(ValueError, match="refusing"):
        kernel_power(k, 2)
