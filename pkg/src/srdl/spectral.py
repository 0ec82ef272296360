"""Leading eigenpairs of the random-walk matrix and truncation-rank choice."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffusionEmbedding:
    lambdas: np.ndarray
    phis: np.ndarray  # (N, M), column n is the n-th right eigenvector of P
    t: int = 30

    @property
    def M(self):
        return self.lambdas.shape[0]

    def truncate(self, m):
        return DiffusionEmbedding(self.lambdas[:m].copy(), self.phis[:, :m].copy(), self.t)


def _symmetric_conjugate(g):
    d = 1.0 / np.sqrt(g.deg)
    return sp.csr_matrix(sp.diags(d) @ g.W @ sp.diags(d))


def _order(vals):
    # |lambda| descending, then lambda descending so +1 precedes -1
    return np.lexsort((-vals, -np.abs(vals)))


def _fix_signs(phis):
    j = np.argmax(np.abs(phis), axis=0)
    signs = np.sign(phis[j, np.arange(phis.shape[1])])
    signs[signs == 0] = 1.0
    return phis * signs


def residuals(g, lambdas, phis):
    """Per-pair ||P phi - lambda phi||_inf."""
    R = g.P @ phis - phis * lambdas
    return np.max(np.abs(R), axis=0)


def eigendecompose(g, max_m, dense_limit=DENSE_LIMIT, tol=1e-10):
    """Top ``max_m`` eigenpairs of ``g.P`` by modulus.

    Computed through ``S = D^-1/2 W D^-1/2``; each eigenvector v of S maps to
    ``phi = D^-1/2 v``, rescaled to unit Euclidean norm with its
    largest-magnitude entry positive.

    Returns
    -------
    lambdas : ndarray, shape (max_m,)
    phis : ndarray, shape (N, max_m)
    """
    N = g.n
    if not 1 <= max_m <= N:
        raise ValueError(f"max_m must lie in [1, {N}], got {max_m}")
    S = _symmetric_conjugate(g)
    if N <= dense_limit or max_m >= N - 1:
        vals, vecs = np.linalg.eigh(S.toarray())
    else:
        maxiter = int(10 * max_m * math.sqrt(N))
        try:
            vals, vecs = eigsh(S, k=max_m, which="LM", tol=tol, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                phis = exc.eigenvectors / np.sqrt(g.deg)[:, None]
                res = residuals(g, exc.eigenvalues, phis / np.linalg.norm(phis, axis=0))
                detail = f"; worst residual {res.max():.3e}"
            else:
                detail = ""
            raise EigenError(f"eigensolver did not converge in {maxiter} iterations{detail}") from None
    sel = _order(vals)[:max_m]
    lambdas = vals[sel]
    phis = vecs[:, sel] / np.sqrt(g.deg)[:, None]
    phis /= np.linalg.norm(phis, axis=0)
    phis = _fix_signs(phis)
    return lambdas, phis


def select_m(lambdas, t=30, cap=50, tau=1e-2):
    """Smallest n >= 2 with (|lambda_{n+1}| / |lambda_2|)^t < tau, clamped to [2, cap].

    ``lambdas`` is indexed from lambda_1 = 1. When no eigenvalue in the
    supplied list satisfies the rule the result is ``min(cap, len(lambdas))``.
    """
    mags = np.abs(np.asarray(lambdas, dtype=float))
    if mags.size < 3:
        raise ValueError("need at least 3 eigenvalues")
    l2 = mags[1]
    if l2 == 0:
        return 2
    # 1-based n has lambda_{n+1} at 0-based position n
    for n in range(2, mags.size):
        if n > cap:
            break
        if (mags[n] / l2) ** t < tau:
            return max(2, min(n, cap))
    return max(2, min(cap, mags.size))


def diffusion_embedding(g, t=30, cap=50, tau=1e-2, dense_limit=DENSE_LIMIT):
    """Eigendecompose ``g``, choose M, and check residuals of the kept pairs."""
    max_m = min(cap + 1, g.n)
    lambdas, phis = eigendecompose(g, max_m, dense_limit=dense_limit)
    M = select_m(lambdas, t=t, cap=cap, tau=tau) if lambdas.size >= 3 else lambdas.size
    lambdas, phis = lambdas[:M], phis[:, :M]
    res = residuals(g, lambdas, phis)
    if np.any(res > RESIDUAL_TOL):
        raise EigenError(f"eigen-residual {res.max():.3e} exceeds {RESIDUAL_TOL:g}")
    return DiffusionEmbedding(lambdas, phis, t)
