"""K-means on raw spectra, for comparison runs."""

import numpy as np
from sklearn.cluster import KMeans


def kmeans_labels(cube, K, seed=0, max_iter=100, tol=1e-6):
    """Seeded K-means (greedy k-means++ init, one start); labels 1..K as (H, W)."""
    if not 1 <= K <= cube.n_pixels:
        raise ValueError(f"K must lie in [1, {cube.n_pixels}]")
    km = KMeans(n_clusters=K, init="k-means++", n_init=1, max_iter=max_iter,
                tol=tol, random_state=seed, algorithm="lloyd")
    labels = km.fit_predict(cube.spectra()) + 1
    return labels.reshape(cube.height, cube.width).astype(np.int64)
