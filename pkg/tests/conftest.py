import numpy as np
import pytest

from mhlab.kernel import block_proposal, build_kernel, random_walk_proposal, table_proposal, uniform_proposal
from mhlab.measure_space import StateSpace, build_grid_space, counting_space, target_density


def random_instance(rng, n=None, positive=True, weights=None):
    """Random (target, proposal) pair on a random-weight space."""
    if n is None:
        n = int(rng.integers(2, 65))
    w = rng.uniform(0.2, 2.0, n) if weights is None else weights
    space = StateSpace(w)
    pi = target_density(space, rng.uniform(0.05, 1.0, n) ** 2)
    raw = rng.uniform(0.0, 1.0, (n, n))
    if not positive:
        raw[rng.uniform(size=(n, n)) < 0.3] = 0.0
        raw[np.arange(n), rng.integers(0, n, n)] += 0.5
    q = table_proposal(space, raw, normalize_rows=True)
    return pi, q


def random_kernel(rng, n=None, positive=True):
    pi, q = random_instance(rng, n, positive)
    return build_kernel(pi, q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_point():
    space = counting_space(2)
    pi = target_density(space, [0.75, 0.25])
    return build_kernel(pi, uniform_proposal(space))


@pytest.fixture(scope="session")
def grid_gaussian():
    space = build_grid_space(-6, 6, 120)
    x = space.coords
    pi = target_density(space, np.exp(-0.5 * x * x))
    return build_kernel(pi, random_walk_proposal(space, 1.0))


@pytest.fixture
def disconnected():
    space = counting_space(4)
    pi = target_density(space, [0.3, 0.2, 0.1, 0.4])
    return build_kernel(pi, block_proposal(space, [[0, 1], [2, 3]]))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
