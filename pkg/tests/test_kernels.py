"""The numba and numpy paths must agree with each other and with loops."""

import numpy as np
import pytest

from srdl import kernels
from srdl.graph import disk_offsets

pytestmark = pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="numba unavailable")


def test_backend_env_flag(monkeypatch):
    monkeypatch.setenv("SRDL_DISABLE_NUMBA", "1")
    assert kernels._default_backend() == "numpy"
    monkeypatch.delenv("SRDL_DISABLE_NUMBA")
    monkeypatch.setenv("SRDL_BACKEND", "numpy")
    assert kernels._default_backend() == "numpy"
    monkeypatch.setenv("SRDL_BACKEND", "bogus")
    with pytest.raises(ValueError):
        kernels._default_backend()


@pytest.mark.parametrize("shape,radius,k", [((9, 7, 5), 2.5, 6), ((12, 4, 3), 4, 100),
                                             ((3, 11, 2), 1, 2)])
def test_spatial_knn_backends_agree(shape, radius, k):
    rng = np.random.default_rng(0)
    cube = rng.normal(size=shape)
    off = disk_offsets(radius, shape[0], shape[1])
    a = kernels.spatial_knn(cube, off, k, backend="numba")
    b = kernels.spatial_knn(cube, off, k, backend="numpy")
    assert np.array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-13)


@pytest.mark.parametrize("include_self", [False, True])
@pytest.mark.parametrize("n,d,k", [(50, 4, 5), (300, 20, 20), (7, 2, 10)])
def test_bruteforce_knn_backends_agree(n, d, k, include_self):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(n, d))
    a = kernels.bruteforce_knn(X, k, include_self, backend="numba")
    b = kernels.bruteforce_knn(X, k, include_self, backend="numpy")
    assert np.array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12)
    # loop oracle
    for i in range(n):
        d2 = ((X - X[i]) ** 2).sum(1)
        cand = [(d2[j], j) for j in range(n) if include_self or j != i]
        ref = [j for _, j in sorted(cand)[:k]]
        assert a[0][i, :len(ref)].tolist() == ref


def test_bruteforce_knn_ties():
    X = np.array([[0.0], [1.0], [-1.0], [1.0], [-1.0]])
    for be in kernels.BACKENDS:
        idx, _ = kernels.bruteforce_knn(X, 4, False, backend=be)
        assert idx[0].tolist() == [1, 2, 3, 4]


def test_nearest_higher_backends_agree():
    rng = np.random.default_rng(2)
    coords = rng.normal(size=(400, 6))
    rank = rng.permutation(400)
    a = kernels.nearest_higher(coords, rank, backend="numba")
    b = kernels.nearest_higher(coords, rank, backend="numpy")
    assert np.array_equal(a[1], b[1])
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    top = int(np.flatnonzero(rank == 0)[0])
    assert a[1][top] == -1 and np.isinf(a[0][top])
    for x in rng.choice(400, 20, replace=False):
        if rank[x] == 0:
            continue
        higher = np.flatnonzero(rank < rank[x])
        d = np.linalg.norm(coords[higher] - coords[x], axis=1)
        assert a[1][x] == higher[np.argmin(d)]


@pytest.mark.parametrize("threshold", [0.5, 0.75, 2.0])
def test_propagate_backends_agree(threshold):
    rng = np.random.default_rng(3)
    H, W = 12, 10
    N = H * W
    coords = rng.normal(size=(N, 3))
    order = rng.permutation(N)
    rank = np.empty(N, dtype=np.int64)
    rank[order] = np.arange(N)
    _, parent = kernels.nearest_higher(coords, rank)
    off = disk_offsets(2, H, W)
    results = []
    for be in kernels.BACKENDS:
        labels = np.zeros(N, dtype=np.int64)
        prov = np.zeros(N, dtype=np.int64)
        labels[order[:3]] = [1, 2, 3]
        prov[order[:3]] = 1
        for stage in (1, 2):
            kernels.propagate(labels, prov, order, parent, coords, H, W, off, threshold, stage,
                              backend=be)
        results.append((labels.copy(), prov.copy()))
    assert np.array_equal(results[0][0], results[1][0])
    assert np.array_equal(results[0][1], results[1][1])
    assert np.all(results[0][0] > 0)


def test_benchmark_script_runs(tmp_path):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    out = tmp_path / "bench.json"
    mod.main(["--size", "24", "--repeat", "1", "--json", str(out)])
    import json
    rows = json.loads(out.read_text())["results"]
    assert {r["kernel"] for r in rows} == {"spatial_knn", "bruteforce_knn", "nearest_higher", "propagate"}
    assert all(r["agree"] for r in rows)
