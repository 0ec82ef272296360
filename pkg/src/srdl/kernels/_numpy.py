import numpy as np

from ._codes import STAGE1_SPECTRAL, STAGE2_CONSENSUS, STAGE2_SPECTRAL

# element budget for temporary blocks
_BLOCK_ELEMS = 1 << 22


def spatial_knn(cube, offsets, k):
    H, W, D = cube.shape
    N = H * W
    n_off = len(offsets)
    idx = np.full((N, k), -1, dtype=np.int64)
    sq = np.full((N, k), np.inf)
    if n_off == 0:
        return idx, sq
    flat_shift = offsets[:, 0] * W + offsets[:, 1]
    rows_per_block = max(1, _BLOCK_ELEMS // max(1, W * max(n_off, D)))
    kk = min(k, n_off)
    for a in range(0, H, rows_per_block):
        b = min(H, a + rows_per_block)
        dist = np.full((b - a, W, n_off), np.inf)
        for o, (dr, dc) in enumerate(offsets):
            i0, i1 = max(a, -dr), min(b, H - dr)
            j0, j1 = max(0, -dc), min(W, W - dc)
            if i0 >= i1 or j0 >= j1:
                continue
            diff = cube[i0:i1, j0:j1] - cube[i0 + dr:i1 + dr, j0 + dc:j1 + dc]
            dist[i0 - a:i1 - a, j0:j1, o] = np.einsum("ijk,ijk->ij", diff, diff)
        dist = dist.reshape(-1, n_off)
        order = np.argsort(dist, axis=1, kind="stable")[:, :kk]
        d = np.take_along_axis(dist, order, axis=1)
        base = np.arange(a * W, b * W)[:, None]
        nb = base + flat_shift[order]
        nb[~np.isfinite(d)] = -1
        idx[a * W:b * W, :kk] = nb
        sq[a * W:b * W, :kk] = d
    return idx, sq


def bruteforce_knn(X, k, include_self):
    N, D = X.shape
    idx = np.full((N, k), -1, dtype=np.int64)
    sq = np.full((N, k), np.inf)
    kk = min(k, N if include_self else N - 1)
    if kk <= 0:
        return idx, sq
    # rank by the Gram expansion, then re-score a padded shortlist exactly
    n_short = min(N, kk + 16 + (0 if include_self else 1))
    norms = np.einsum("ij,ij->i", X, X)
    block = max(1, _BLOCK_ELEMS // max(N, n_short * D))
    for a in range(0, N, block):
        b = min(N, a + block)
        rows = np.arange(a, b)
        approx = norms[a:b, None] + norms[None, :] - 2.0 * (X[a:b] @ X.T)
        np.maximum(approx, 0.0, out=approx)
        if not include_self:
            approx[rows - a, rows] = np.inf
        if n_short < N:
            short = np.argpartition(approx, n_short - 1, axis=1)[:, :n_short]
        else:
            short = np.broadcast_to(np.arange(N), (b - a, N)).copy()
        diff = X[short] - X[a:b, None, :]
        exact = np.einsum("ijk,ijk->ij", diff, diff)
        if not include_self:
            exact[short == rows[:, None]] = np.inf
        # primary key distance, secondary key flat index
        order = np.lexsort((short, exact), axis=1)[:, :kk]
        idx[a:b, :kk] = np.take_along_axis(short, order, axis=1)
        sq[a:b, :kk] = np.take_along_axis(exact, order, axis=1)
    return idx, sq


def nearest_higher(coords, rank):
    N, M = coords.shape
    rho = np.full(N, np.inf)
    parent = np.full(N, -1, dtype=np.int64)
    block = max(1, _BLOCK_ELEMS // max(1, N * M))
    for a in range(0, N, block):
        b = min(N, a + block)
        diff = coords[a:b, None, :] - coords[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[rank[None, :] >= rank[a:b, None]] = np.inf
        j = np.argmin(d2, axis=1)
        best = d2[np.arange(b - a), j]
        ok = np.isfinite(best)
        rho[a:b][ok] = np.sqrt(best[ok])
        parent[a:b][ok] = j[ok]
    return rho, parent


def _consensus(labels, x, H, W, offsets, threshold):
    ci, cj = divmod(int(x), W)
    rr = ci + offsets[:, 0]
    cc = cj + offsets[:, 1]
    ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
    labs = labels[rr[ok] * W + cc[ok]]
    labs = labs[labs > 0]
    if labs.size == 0:
        return 0
    counts = np.bincount(labs)
    best = int(np.argmax(counts))
    if counts[best] > threshold * labs.size:
        return best
    return 0


def propagate(labels, prov, order, parent, coords, H, W, offsets, threshold, stage):
    use_consensus = threshold <= 1.0 and len(offsets) > 0
    visited = 0
    labeled_mask = labels != 0
    for pos in range(len(order)):
        x = order[pos]
        if labels[x] != 0:
            continue
        visited += 1
        cons = _consensus(labels, x, H, W, offsets, threshold) if use_consensus else 0
        if stage == 2 and cons != 0:
            labels[x] = cons
            prov[x] = STAGE2_CONSENSUS
            labeled_mask[x] = True
            continue
        p = parent[x]
        if p >= 0 and labels[p] != 0:
            nb = p
        else:
            higher = order[:pos]
            higher = higher[labeled_mask[higher]]
            if higher.size == 0:
                raise RuntimeError("no labeled pixel of higher density")
            diff = coords[higher] - coords[x]
            d2 = np.einsum("ij,ij->i", diff, diff)
            best = d2.min()
            nb = higher[d2 == best].min()
        cand = labels[nb]
        if stage == 1:
            if cons != 0 and cons != cand:
                continue
            labels[x] = cand
            prov[x] = STAGE1_SPECTRAL
        else:
            labels[x] = cand
            prov[x] = STAGE2_SPECTRAL
        labeled_mask[x] = True
    return visited
