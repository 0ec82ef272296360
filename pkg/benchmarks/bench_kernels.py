"""Time the numba and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--size 120] [--repeat 3] [--json out.json]

Each kernel runs once per backend before timing so JIT compilation is not
counted. Outputs of the two backends are compared as a sanity check.
"""

import argparse
import json
import time

import numpy as np

from srdl import kernels
from srdl.graph import disk_offsets
from srdl.kernels import _codes
from srdl.modes import break_ties, strict_density_order


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        s = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - s)
    return min(times), out


def cases(size, rng):
    cube = rng.normal(size=(size, size, 30))
    offsets = disk_offsets(5, size, size)
    X = rng.normal(size=(size * size // 4, 30))
    n_modes = 8
    coords = rng.normal(size=(size * size // 4, 12))
    p = break_ties(rng.uniform(size=coords.shape[0]))
    order = strict_density_order(p)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)

    def propagate(backend):
        _, parent = kernels.nearest_higher(coords, rank, backend="numba")
        labels = np.zeros(coords.shape[0], dtype=np.int64)
        prov = np.zeros_like(labels)
        labels[order[:n_modes]] = np.arange(1, n_modes + 1)
        prov[order[:n_modes]] = _codes.MODE
        H = size // 2
        off = disk_offsets(2, H, H)

        def run():
            lab, pr = labels.copy(), prov.copy()
            kernels.propagate(lab, pr, order, parent, coords, H, H, off, 0.5, 1, backend=backend)
            kernels.propagate(lab, pr, order, parent, coords, H, H, off, 0.5, 2, backend=backend)
            return lab
        return run

    return {
        "spatial_knn": lambda b: (lambda: kernels.spatial_knn(cube, offsets, 50, backend=b)),
        "bruteforce_knn": lambda b: (lambda: kernels.bruteforce_knn(X, 20, include_self=True, backend=b)),
        "nearest_higher": lambda b: (lambda: kernels.nearest_higher(coords, rank, backend=b)),
        "propagate": propagate,
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12, equal_nan=True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=120, help="image side for the k-NN case")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    rows = []
    for name, make in cases(args.size, rng).items():
        timings, outputs = {}, {}
        for backend in ("numba", "numpy"):
            fn = make(backend)
            fn()  # warm-up / compile
            timings[backend], outputs[backend] = best_of(fn, args.repeat)
        rows.append({"kernel": name, "numba_s": timings["numba"], "numpy_s": timings["numpy"],
                     "speedup": timings["numpy"] / timings["numba"],
                     "agree": bool(same(outputs["numba"], outputs["numpy"]))})

    print(f"{'kernel':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  agree")
    for r in rows:
        print(f"{r['kernel']:<16}{r['numba_s']:>12.4f}{r['numpy_s']:>12.4f}{r['speedup']:>10.2f}  {r['agree']}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"size": args.size, "repeat": args.repeat, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
