"""Diffusion coordinates and distances."""

import numpy as np

BRUTEFORCE_LIMIT = 3000


def embed(e, t=None):
    """Rows are pixels, columns are lambda_n^t * phi_n."""
    t = e.t if t is None else t
    return e.phis * (e.lambdas ** t)[None, :]


def stationary_normalize(phis, deg):
    """Rescale eigenvectors to be orthonormal in the degree-weighted inner product.

    With this scaling, Euclidean distance between diffusion coordinates equals
    the transition-row distance weighted by 1/deg (see
    ``diffusion_distance_bruteforce(..., weighted=True)``).
    """
    scale = np.sqrt(np.einsum("ij,i,ij->j", phis, deg, phis))
    return phis / scale


def diffusion_distance(coords, x, y):
    d = coords[x] - coords[y]
    return float(np.sqrt(d @ d))


def pairwise_distances(coords):
    """Full N x N Euclidean distance matrix of the coordinates (small N only)."""
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def transition_power(g, t):
    if g.n > BRUTEFORCE_LIMIT:
        raise ValueError(f"dense matrix power refused for N={g.n} > {BRUTEFORCE_LIMIT}")
    if t < 1:
        raise ValueError("t must be >= 1")
    return np.linalg.matrix_power(g.P.toarray(), t)


def diffusion_distance_bruteforce(g, t, x, y, weighted=False, Pt=None):
    """sqrt(sum_u (P^t(x,u) - P^t(y,u))^2) from an explicit dense power of P.

    ``weighted=True`` divides each term by deg(u) (stationary weighting).
    ``Pt`` may carry a precomputed ``P^t``.
    """
    if Pt is None:
        Pt = transition_power(g, t)
    d = Pt[x] - Pt[y]
    if weighted:
        return float(np.sqrt(np.sum(d * d / g.deg)))
    return float(np.sqrt(d @ d))
