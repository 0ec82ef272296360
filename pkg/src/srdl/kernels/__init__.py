"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``SRDL_BACKEND`` (``numba`` or
``numpy``). Setting ``SRDL_DISABLE_NUMBA=1`` is equivalent to
``SRDL_BACKEND=numpy``. If numba cannot be imported the numpy path is used.
Every public kernel also accepts an explicit ``backend=`` keyword so both
paths can be exercised side by side (tests, benchmarks).
"""

import os

from . import _numpy

try:
    from . import _numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAS_NUMBA = False


def _default_backend():
    name = os.environ.get("SRDL_BACKEND", "").strip().lower()
    if os.environ.get("SRDL_DISABLE_NUMBA", "").strip() in ("1", "true", "yes"):
        name = "numpy"
    if not name:
        name = "numba" if HAS_NUMBA else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown SRDL_BACKEND {name!r}")
    if name == "numba" and not HAS_NUMBA:
        name = "numpy"
    return name


BACKEND = _default_backend()
BACKENDS = ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def _impl(backend):
    backend = backend or BACKEND
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _numba
    if backend == "numpy":
        return _numpy
    raise ValueError(f"unknown backend {backend!r}")


def spatial_knn(cube, offsets, k, *, backend=None):
    """k spectral nearest neighbours of every pixel among a window of offsets.

    Parameters
    ----------
    cube : ndarray, shape (H, W, D)
    offsets : ndarray of int64, shape (n_off, 2)
        (drow, dcol) pairs in lexicographic order, centre excluded.
    k : int

    Returns
    -------
    idx : ndarray of int64, shape (H*W, k)
        Flat neighbour indices, -1 where fewer than k candidates exist.
    sqdist : ndarray of float64, shape (H*W, k)
        Squared Euclidean spectral distances, inf where idx is -1.
    """
    return _impl(backend).spatial_knn(cube, offsets, int(k))


def bruteforce_knn(X, k, include_self=False, *, backend=None):
    """k nearest neighbours among all rows of X (exact, ties to lower index)."""
    return _impl(backend).bruteforce_knn(X, int(k), bool(include_self))


def nearest_higher(coords, rank, *, backend=None):
    """Distance and index of the nearest point of strictly lower rank.

    ``rank[i] == 0`` marks the densest point; its entries are returned as
    ``inf`` and ``-1``.
    """
    return _impl(backend).nearest_higher(coords, rank)


def propagate(labels, prov, order, parent, coords, height, width, offsets,
              threshold, stage, *, backend=None):
    """Run one labeling stage in place over ``order`` (decreasing density).

    ``parent`` holds each pixel's nearest higher-density pixel; it is used as
    a shortcut whenever that pixel already carries a label. ``stage`` is 1
    or 2. Returns the number of unlabeled pixels visited.
    """
    return _impl(backend).propagate(labels, prov, order, parent, coords,
                                    int(height), int(width), offsets,
                                    float(threshold), int(stage))
