import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srdl.diffusion import (diffusion_distance, diffusion_distance_bruteforce, embed,
                            pairwise_distances, stationary_normalize, transition_power)
from srdl.graph import from_weights
from srdl.spectral import DiffusionEmbedding, eigendecompose

from conftest import random_connected_graph, regular_ring_graph


def two_cycle():
    return from_weights(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_embed_t0_is_raw_eigenvectors(rng):
    g = random_connected_graph(rng, 20)
    lam, phi = eigendecompose(g, 5)
    np.testing.assert_array_equal(embed(DiffusionEmbedding(lam, phi, 0)), phi)


def test_embed_doubling_t(rng):
    g = random_connected_graph(rng, 20)
    lam, phi = eigendecompose(g, 5)
    c1 = embed(DiffusionEmbedding(lam, phi, 7))
    c2 = embed(DiffusionEmbedding(lam, phi, 14))
    np.testing.assert_allclose(c2 * phi, c1 * c1, rtol=1e-12, atol=1e-300)


def test_embed_column_norms(rng):
    g = random_connected_graph(rng, 30)
    lam, phi = eigendecompose(g, 6)
    c = embed(DiffusionEmbedding(lam, phi, 3))
    np.testing.assert_allclose(np.linalg.norm(c, axis=0), np.abs(lam) ** 3, rtol=1e-12)


def test_two_cycle_t30_second_column():
    lam, phi = eigendecompose(two_cycle(), 2)
    c = embed(DiffusionEmbedding(lam, phi, 30))
    np.testing.assert_allclose(c[:, 1], (-1.0) ** 30 * phi[:, 1], atol=1e-15)
    np.testing.assert_allclose(c[:, 1], phi[:, 1], atol=1e-15)


def test_two_cycle_t1_distance():
    g = two_cycle()
    lam, phi = eigendecompose(g, 2)
    c = embed(DiffusionEmbedding(lam, phi, 1))
    Pt = transition_power(g, 1)
    assert np.array_equal(Pt, [[0, 1], [1, 0]])
    assert diffusion_distance_bruteforce(g, 1, 0, 1) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert diffusion_distance(c, 0, 1) == pytest.approx(np.sqrt(2), abs=1e-14)


def test_two_cycle_t2_bruteforce():
    g = two_cycle()
    assert np.array_equal(transition_power(g, 2), np.eye(2))
    assert diffusion_distance_bruteforce(g, 2, 0, 1) == pytest.approx(np.sqrt(2), abs=1e-15)


def test_bruteforce_self_zero(rng):
    g = random_connected_graph(rng, 15)
    for x in range(15):
        assert diffusion_distance_bruteforce(g, 3, x, x) == 0.0


def test_bruteforce_converges(rng):
    g = random_connected_graph(rng, 25, extra=40)
    means = [pairwise_distances(transition_power(g, t)).mean() for t in (1, 4, 16, 64, 256)]
    assert all(a > b for a, b in zip(means, means[1:]))
    assert means[-1] < 1e-8


def test_bruteforce_size_guard():
    from srdl import diffusion
    g = random_connected_graph(np.random.default_rng(0), 10)
    old = diffusion.BRUTEFORCE_LIMIT
    diffusion.BRUTEFORCE_LIMIT = 5
    try:
        with pytest.raises(ValueError):
            transition_power(g, 2)
    finally:
        diffusion.BRUTEFORCE_LIMIT = old


@pytest.mark.parametrize("t", [1, 5, 30])
@pytest.mark.parametrize("n", [12, 50])
def test_identity_on_regular_graphs(t, n):
    # with constant degree P is symmetric and the unweighted row distance
    # equals the eigen form exactly
    g = regular_ring_graph(np.random.default_rng(n + t), n, hops=3)
    lam, phi = eigendecompose(g, n)
    d2 = pairwise_distances(embed(DiffusionEmbedding(lam, phi, t)))
    d1 = pairwise_distances(transition_power(g, t))
    # near convergence (t=30) the rows of P^t agree to ~1e-9, so their
    # difference carries absolute rounding error of order eps * |P^t|
    assert np.max(np.abs(d2 - d1)) <= 1e-8 * d1.max() + 1e-13


@pytest.mark.parametrize("t", [1, 5, 30])
@pytest.mark.parametrize("seed", range(4))
def test_identity_degree_weighted(t, seed):
    # on general graphs the eigen form reproduces the 1/deg-weighted row distance
    rng = np.random.default_rng(seed)
    n = 50
    g = random_connected_graph(rng, n, extra=n // 2)
    lam, phi = eigendecompose(g, n)
    c = embed(DiffusionEmbedding(lam, stationary_normalize(phi, g.deg), t))
    Pt = transition_power(g, t)
    scale = pairwise_distances(c).max()
    for x in range(0, n, 7):
        for y in range(n):
            if x == y:
                continue
            ref = diffusion_distance_bruteforce(g, t, x, y, weighted=True, Pt=Pt)
            assert abs(diffusion_distance(c, x, y) - ref) <= 1e-8 * max(ref, scale)


def test_truncation_monotone(rng):
    g = random_connected_graph(rng, 40)
    lam, phi = eigendecompose(g, 40)
    c = embed(DiffusionEmbedding(lam, phi, 2))
    full = pairwise_distances(c)
    for m in (2, 5, 10, 39):
        assert np.all(pairwise_distances(c[:, :m]) <= full + 1e-15)


def test_sign_invariance(rng):
    g = random_connected_graph(rng, 30)
    lam, phi = eigendecompose(g, 8)
    flipped = phi.copy()
    flipped[:, [1, 4, 6]] *= -1
    a = pairwise_distances(embed(DiffusionEmbedding(lam, phi, 5)))
    b = pairwise_distances(embed(DiffusionEmbedding(lam, flipped, 5)))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(12, 4))
    d = pairwise_distances(c)
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    i, j, k = rng.integers(12, size=3)
    assert d[i, k] <= d[i, j] + d[j, k] + 1e-12
    assert diffusion_distance(c, i, j) == pytest.approx(d[i, j], rel=1e-12)
