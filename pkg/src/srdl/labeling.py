"""Two-stage labeling from modes, plus the end-to-end pipeline."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .diffusion import embed
from .graph import GraphConfig, build_graph, disk_offsets
from .kernels import _codes
from .modes import KdeConfig, kde, mode_model
from .spectral import diffusion_embedding

PROVENANCE = {
    _codes.NONE: "unlabeled",
    _codes.MODE: "mode",
    _codes.STAGE1_SPECTRAL: "stage1-spectral",
    _codes.STAGE2_CONSENSUS: "stage2-consensus",
    _codes.STAGE2_SPECTRAL: "stage2-spectral",
}


@dataclass
class LabelMap:
    labels: np.ndarray      # (H, W), 0 = unlabeled, clusters 1..K
    provenance: np.ndarray  # (H, W) provenance codes
    consensus_radius: float
    consensus_threshold: float

    def provenance_names(self):
        return np.vectorize(PROVENANCE.get, otypes=[object])(self.provenance)


def consensus_label(labels, p, r_c, threshold):
    """Label held by more than ``threshold`` of the labeled pixels within ``r_c``.

    ``labels`` is the (H, W) map, ``p`` a (row, col) pair. Returns 0 when no
    label qualifies or no labeled pixel lies in the disk.
    """
    if not r_c > 0:
        raise ValueError("consensus radius must be positive")
    labels = np.asarray(labels)
    H, W = labels.shape
    r, c = p
    rr, cc = np.mgrid[0:H, 0:W]
    d2 = (rr - r) ** 2 + (cc - c) ** 2
    window = (d2 > 0) & (d2 <= r_c * r_c) & (labels > 0)
    labs = labels[window]
    if labs.size == 0:
        return 0
    counts = np.bincount(labs)
    best = int(np.argmax(counts))
    return best if counts[best] > threshold * labs.size else 0


def _consensus_offsets(r_c, H, W, threshold):
    if threshold > 1.0 or r_c is None or (isinstance(r_c, float) and math.isnan(r_c)):
        return np.zeros((0, 2), dtype=np.int64)
    return disk_offsets(r_c, H, W)


def initial_labels(N, modes):
    labels = np.zeros(N, dtype=np.int64)
    prov = np.zeros(N, dtype=np.int64)
    labels[modes] = np.arange(1, len(modes) + 1)
    prov[modes] = _codes.MODE
    return labels, prov


def stage1(labels, prov, model, coords, shape, r_c, threshold, backend=None):
    """Density-ordered spectral propagation with spatial veto (in place)."""
    H, W = shape
    offsets = _consensus_offsets(r_c, H, W, threshold)
    return kernels.propagate(labels, prov, model.order, model.parent,
                             np.ascontiguousarray(coords), H, W, offsets, threshold, 1,
                             backend=backend)


def stage2(labels, prov, model, coords, shape, r_c, threshold, backend=None):
    """Fill the pixels Stage 1 left open: spatial consensus first, else spectral (in place)."""
    H, W = shape
    offsets = _consensus_offsets(r_c, H, W, threshold)
    return kernels.propagate(labels, prov, model.order, model.parent,
                             np.ascontiguousarray(coords), H, W, offsets, threshold, 2,
                             backend=backend)


def label_pixels(model, coords, shape, r_c, threshold=0.5, backend=None):
    N = coords.shape[0]
    labels, prov = initial_labels(N, model.modes)
    stage1(labels, prov, model, coords, shape, r_c, threshold, backend=backend)
    stage2(labels, prov, model, coords, shape, r_c, threshold, backend=backend)
    return LabelMap(labels.reshape(shape), prov.reshape(shape), r_c, threshold)


@dataclass
class SRDLConfig:
    """End-to-end pipeline parameters.

    ``consensus_radius=None`` reuses the graph radius; with an infinite graph
    radius the spatial consensus is switched off, which gives the
    spectral-only diffusion learning baseline.
    """

    radius: float = math.inf
    k: int = 100
    t: int = 30
    clusters: int | None = None
    sigma: float | None = None
    sigma_multiplier: float = 1.0
    kde_neighbors: int = 20
    kde_bandwidth: float | None = None
    consensus_radius: float | None = None
    consensus_threshold: float = 0.5
    m_cap: int = 50
    tau: float = 1e-2
    k_max: int = 20
    allow_disconnected: bool = False
    graph_backend: str | None = field(default=None, repr=False)

    def graph_config(self):
        return GraphConfig(k=self.k, radius=self.radius, sigma=self.sigma,
                           sigma_multiplier=self.sigma_multiplier,
                           allow_disconnected=self.allow_disconnected)

    def resolved_consensus(self):
        r_c = self.radius if self.consensus_radius is None else self.consensus_radius
        if math.isinf(r_c):
            return None, 2.0
        return r_c, self.consensus_threshold

    def as_dict(self):
        d = asdict(self)
        d.pop("graph_backend")
        return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


@dataclass
class ClusterResult:
    labels: LabelMap
    modes: object
    embedding: object
    graph: object
    coords: np.ndarray


def cluster(cube, cfg=None, backend=None):
    """Graph, embedding, modes and two-stage labeling for one cube."""
    cfg = cfg or SRDLConfig()
    g = build_graph(cube, cfg.graph_config(), backend=backend)
    emb = diffusion_embedding(g, t=cfg.t, cap=cfg.m_cap, tau=cfg.tau)
    coords = embed(emb)
    p = kde(cube.spectra(), KdeConfig(cfg.kde_neighbors, cfg.kde_bandwidth), backend=backend)
    model = mode_model(p, coords, K=cfg.clusters, k_max=cfg.k_max, backend=backend)
    r_c, threshold = cfg.resolved_consensus()
    lm = label_pixels(model, coords, (cube.height, cube.width), r_c, threshold, backend=backend)
    return ClusterResult(labels=lm, modes=model, embedding=emb, graph=g, coords=coords)
