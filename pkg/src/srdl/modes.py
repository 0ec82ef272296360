"""Density estimation, nearest higher-density neighbours and mode selection."""

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

TIE_EPS = 1e-12


class DensityError(ValueError):
    pass


@dataclass(frozen=True)
class KdeConfig:
    n_neighbors: int = 20
    bandwidth: float | None = None


@dataclass(frozen=True)
class ModeModel:
    p: np.ndarray
    rho_t: np.ndarray
    d_t: np.ndarray
    parent: np.ndarray  # -1 at the density maximizer
    order: np.ndarray   # pixel indices by strictly decreasing density
    modes: np.ndarray
    k_hat: int

    @property
    def rank(self):
        r = np.empty_like(self.order)
        r[self.order] = np.arange(self.order.size)
        return r


def strict_density_order(p):
    """Indices by decreasing ``p``, equal values ordered by lower index."""
    p = np.asarray(p)
    return np.lexsort((np.arange(p.size), -p))


def break_ties(p):
    """Make ``p`` injective: the i-th pixel in density order loses i * 1e-12."""
    order = strict_density_order(p)
    out = np.asarray(p, dtype=float).copy()
    out[order] -= TIE_EPS * np.arange(out.size)
    return out


def kde(X, cfg=None, backend=None):
    """Gaussian density over each point's spectral nearest neighbours.

    ``X`` is (N, D) or an HsiCube. The neighbourhood of a point includes the
    point itself (its first neighbour at distance 0). The bandwidth defaults
    to the mean distance to the ``n_neighbors``-th neighbour. The result is
    scaled to maximum 1 and tie-broken so it is strictly ordered.
    """
    cfg = cfg or KdeConfig()
    if hasattr(X, "spectra"):
        X = X.spectra()
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if N < 2:
        raise DensityError("density needs at least 2 points")
    kk = min(cfg.n_neighbors, N)
    _, sq = kernels.bruteforce_knn(X, kk, include_self=True, backend=backend)
    if cfg.bandwidth is not None:
        sigma = float(cfg.bandwidth)
    else:
        sigma = float(np.mean(np.sqrt(sq[:, kk - 1])))
    if not sigma > 0:
        raise DensityError(
            "density bandwidth is zero because the spectra coincide; "
            "apply jitter_duplicates first")
    p = np.exp(-sq / sigma ** 2).sum(axis=1)
    p /= p.max()
    return break_ties(p)


def rho_and_parent(p, coords, backend=None):
    """Diffusion distance to, and index of, the nearest strictly denser point.

    The densest point gets ``rho`` equal to the largest value among the others
    and parent -1.
    """
    p = np.asarray(p)
    N = p.size
    order = strict_density_order(p)
    if np.any(np.diff(p[order]) >= 0):
        raise DensityError("densities must be strictly ordered; call break_ties")
    rank = np.empty(N, dtype=np.int64)
    rank[order] = np.arange(N)
    rho, parent = kernels.nearest_higher(np.ascontiguousarray(coords, dtype=float), rank,
                                         backend=backend)
    top = order[0]
    rho[top] = np.max(rho[order[1:]]) if N > 1 else 0.0
    parent[top] = -1
    return rho, parent


def select_modes(d_t, K):
    """Indices of the K largest scores, ties to the lower index."""
    d_t = np.asarray(d_t)
    if not 1 <= K <= d_t.size:
        raise ValueError(f"K must lie in [1, {d_t.size}], got {K}")
    return np.lexsort((np.arange(d_t.size), -d_t))[:K]


def estimate_k(d_t, k_max=20):
    """Number of clusters at the largest ratio between consecutive sorted scores."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    s = np.sort(np.asarray(d_t, dtype=float))[::-1]
    m = min(k_max, s.size)
    if m < 2:
        return 1
    head, tail = s[: m - 1], s[1:m]
    if np.all(head == tail):
        log.warning("all leading scores are equal; estimating a single cluster")
        return 1
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(tail > 0, head / tail, np.where(head > 0, np.inf, 1.0))
    return int(np.argmax(ratio)) + 1


def mode_model(p, coords, K=None, k_max=20, backend=None):
    rho, parent = rho_and_parent(p, coords, backend=backend)
    d_t = p * rho
    k_hat = estimate_k(d_t, k_max=k_max)
    modes = select_modes(d_t, k_hat if K is None else K)
    return ModeModel(p=np.asarray(p), rho_t=rho, d_t=d_t, parent=parent,
                     order=strict_density_order(p), modes=modes, k_hat=k_hat)


def dump_decision_graph(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pixel,p,rho_t,d_t,parent\n")
        for i in range(model.p.size):
            fh.write(f"{i},{float(model.p[i])!r},{float(model.rho_t[i])!r},"
                     f"{float(model.d_t[i])!r},{int(model.parent[i])}\n")
