"""Spatially constrained k-NN kernel graph and its random-walk matrix."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels


class GraphError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphConfig:
    """Parameters of the kernel graph.

    ``radius`` is the spatial disk radius in pixels (``math.inf`` disables the
    spatial constraint). ``sigma`` fixes the kernel scale; when ``None`` the
    scale is ``sigma_multiplier`` times the mean spectral distance over all
    retained directed edges.
    """

    k: int = 100
    radius: float = math.inf
    sigma: float | None = None
    sigma_multiplier: float = 1.0
    symmetrize: str = "max"
    allow_disconnected: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("fixed sigma must be positive")
        if not self.sigma_multiplier > 0:
            raise ValueError("sigma_multiplier must be positive")
        if self.symmetrize not in ("max", "min"):
            raise ValueError(f"unknown symmetrization {self.symmetrize!r}")


@dataclass(frozen=True)
class SparseMarkov:
    """Symmetric weights ``W`` (CSR), degrees and ``P = D^-1 W``."""

    W: sp.csr_matrix
    deg: np.ndarray
    P: sp.csr_matrix
    sigma: float

    @property
    def n(self):
        return self.W.shape[0]


def disk_offsets(radius, height=None, width=None):
    """Lattice offsets (dr, dc) with 0 < dr^2 + dc^2 <= radius^2, lexicographic.

    An infinite radius needs ``height`` and ``width`` and yields every offset
    that can land inside the image.
    """
    if math.isinf(radius):
        if height is None or width is None:
            raise ValueError("infinite radius needs image dimensions")
        R_r, R_c = height - 1, width - 1
        dr, dc = np.meshgrid(np.arange(-R_r, R_r + 1), np.arange(-R_c, R_c + 1), indexing="ij")
        keep = (dr != 0) | (dc != 0)
    else:
        R = int(math.floor(radius))
        if height is not None:
            R_r = min(R, height - 1)
            R_c = min(R, width - 1)
        else:
            R_r = R_c = R
        dr, dc = np.meshgrid(np.arange(-R_r, R_r + 1), np.arange(-R_c, R_c + 1), indexing="ij")
        d2 = dr * dr + dc * dc
        keep = (d2 > 0) & (d2 <= radius * radius)
    return np.stack([dr[keep], dc[keep]], axis=1).astype(np.int64)


def spatial_candidates(cube, p, radius):
    """Flat indices of pixels q != p within Euclidean pixel distance ``radius``."""
    H, W = cube.height, cube.width
    if isinstance(p, tuple):
        r, c = p
    elif hasattr(p, "row"):
        r, c = p.row, p.col
    else:
        r, c = divmod(int(p), W)
    if not (0 <= r < H and 0 <= c < W):
        raise IndexError(f"pixel ({r}, {c}) outside {H}x{W}")
    off = disk_offsets(radius, H, W)
    rr = r + off[:, 0]
    cc = c + off[:, 1]
    ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
    return (rr[ok] * W + cc[ok]).astype(np.int64)


def kernel_weight(x, y, sigma):
    """Gaussian affinity exp(-||x - y||^2 / sigma^2)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite spectrum")
    d2 = float(np.sum((x - y) ** 2))
    return math.exp(-d2 / sigma ** 2)


def _covers_image(radius, height, width):
    return math.isinf(radius) or radius * radius >= (height - 1) ** 2 + (width - 1) ** 2


def knn_edges(cube, cfg, backend=None):
    """Directed k-NN lists: (idx, sqdist), each (N, k) with -1 / inf padding."""
    if _covers_image(cfg.radius, cube.height, cube.width):
        return kernels.bruteforce_knn(cube.spectra(), cfg.k, include_self=False, backend=backend)
    offsets = disk_offsets(cfg.radius, cube.height, cube.width)
    return kernels.spatial_knn(cube.data, offsets, cfg.k, backend=backend)


def assemble(idx, sqdist, cfg, n=None):
    """Turn directed neighbour lists into a SparseMarkov."""
    N = idx.shape[0] if n is None else n
    valid = idx >= 0
    rows = np.repeat(np.arange(idx.shape[0]), valid.sum(axis=1))
    cols = idx[valid]
    d2 = sqdist[valid]
    if cfg.sigma is not None:
        sigma = float(cfg.sigma)
    else:
        if d2.size == 0:
            raise GraphError("graph has no edges")
        sigma = cfg.sigma_multiplier * float(np.mean(np.sqrt(d2)))
        if not sigma > 0:
            raise GraphError(
                "adaptive sigma is zero (all neighbours coincide); "
                "apply jitter_duplicates or pass a fixed sigma")
    w = np.exp(-d2 / sigma ** 2)
    A = sp.csr_matrix((w, (rows, cols)), shape=(N, N))
    A.sum_duplicates()
    if cfg.symmetrize == "max":
        W = A.maximum(A.T)
    else:
        # mutual neighbours only
        W = A.minimum(A.T)
    W = sp.csr_matrix(W)
    W.setdiag(0.0)
    W.eliminate_zeros()
    W.sort_indices()
    deg = np.asarray(W.sum(axis=1)).ravel()
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise GraphError(f"pixel {int(isolated[0])} is isolated (degree 0)")
    P = sp.csr_matrix(sp.diags(1.0 / deg) @ W)
    P.sort_indices()
    return SparseMarkov(W=W, deg=deg, P=P, sigma=sigma)


def build_graph(cube, cfg=None, backend=None):
    """Spatially constrained k-NN Gaussian graph of ``cube``.

    Each pixel is linked to its ``cfg.k`` spectrally nearest pixels among
    those within ``cfg.radius`` (all of them when fewer exist). Distance ties
    go to the lower flat index. Raises GraphError on isolated vertices and,
    unless ``cfg.allow_disconnected``, on a disconnected graph.
    """
    cfg = cfg or GraphConfig()
    idx, sqdist = knn_edges(cube, cfg, backend=backend)
    g = assemble(idx, sqdist, cfg, n=cube.n_pixels)
    if not cfg.allow_disconnected:
        n_comp = n_components(g)
        if n_comp > 1:
            raise GraphError(
                f"graph has {n_comp} connected components; increase radius or k "
                "(or allow_disconnected=True)")
    return g


def n_components(g):
    n, _ = connected_components(g.W, directed=False)
    return int(n)


def is_connected(g):
    return n_components(g) == 1


def dump_coo(matrix, path):
    """Write a sparse matrix as ``row,col,value`` lines."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w", encoding="utf-8") as fh:
        for i in order:
            fh.write(f"{m.row[i]},{m.col[i]},{float(m.data[i])!r}\n")


def from_weights(W, sigma=float("nan")):
    """SparseMarkov from an explicit symmetric non-negative weight matrix."""
    W = sp.csr_matrix(W, dtype=float)
    if W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    if (W != W.T).nnz:
        raise ValueError("weight matrix must be symmetric")
    if W.nnz and W.data.min() < 0:
        raise ValueError("weights must be non-negative")
    W.setdiag(0.0)
    W.eliminate_zeros()
    W.sort_indices()
    deg = np.asarray(W.sum(axis=1)).ravel()
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise GraphError(f"vertex {int(isolated[0])} is isolated (degree 0)")
    P = sp.csr_matrix(sp.diags(1.0 / deg) @ W)
    P.sort_indices()
    return SparseMarkov(W=W, deg=deg, P=P, sigma=sigma)
