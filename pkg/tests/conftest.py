import numpy as np
import pytest

from srdl import kernels
from srdl.graph import from_weights


@pytest.fixture(params=kernels.BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_connected_weights(rng, n, extra=None, low=0.2):
    """Symmetric weights: a random spanning tree plus random extra edges."""
    W = np.zeros((n, n))
    perm = rng.permutation(n)
    for i in range(1, n):
        j = perm[rng.integers(i)]
        W[perm[i], j] = rng.uniform(low, 1.0)
    for _ in range(n if extra is None else extra):
        i, j = rng.integers(n, size=2)
        if i != j:
            W[i, j] = rng.uniform(low, 1.0)
    return np.maximum(W, W.T)


def random_connected_graph(rng, n, extra=None):
    return from_weights(random_connected_weights(rng, n, extra))


def regular_ring_graph(rng, n, hops=2):
    """Circulant graph with random symmetric weights per hop: all degrees equal."""
    W = np.zeros((n, n))
    for h in range(1, hops + 1):
        w = rng.uniform(0.2, 1.0)
        for i in range(n):
            W[i, (i + h) % n] = W[(i + h) % n, i] = w
    return from_weights(W)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
