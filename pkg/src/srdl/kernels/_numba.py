import numpy as np
from numba import njit

from ._codes import STAGE1_SPECTRAL, STAGE2_CONSENSUS, STAGE2_SPECTRAL


@njit(cache=True)
def spatial_knn(cube, offsets, k):
    H, W, D = cube.shape
    n_off = offsets.shape[0]
    N = H * W
    idx = np.full((N, k), -1, dtype=np.int64)
    sq = np.full((N, k), np.inf)
    cand_d = np.empty(n_off)
    cand_i = np.empty(n_off, dtype=np.int64)
    for i in range(H):
        for j in range(W):
            m = 0
            for o in range(n_off):
                ii = i + offsets[o, 0]
                jj = j + offsets[o, 1]
                if ii < 0 or ii >= H or jj < 0 or jj >= W:
                    continue
                s = 0.0
                for b in range(D):
                    d = cube[i, j, b] - cube[ii, jj, b]
                    s += d * d
                cand_d[m] = s
                cand_i[m] = ii * W + jj
                m += 1
            # offsets are lexicographic, so candidates are in flat-index order
            # and a stable sort breaks distance ties toward the lower index
            order = np.argsort(cand_d[:m], kind="mergesort")
            p = i * W + j
            for q in range(min(k, m)):
                idx[p, q] = cand_i[order[q]]
                sq[p, q] = cand_d[order[q]]
    return idx, sq


@njit(cache=True)
def bruteforce_knn(X, k, include_self):
    N, D = X.shape
    idx = np.full((N, k), -1, dtype=np.int64)
    sq = np.full((N, k), np.inf)
    dist = np.empty(N)
    for i in range(N):
        for j in range(N):
            if j == i and not include_self:
                dist[j] = np.inf
                continue
            s = 0.0
            for b in range(D):
                d = X[i, b] - X[j, b]
                s += d * d
            dist[j] = s
        n_valid = N if include_self else N - 1
        kk = min(k, n_valid)
        if kk == 0:
            continue
        kth = np.partition(dist, kk - 1)[kk - 1]
        cand = np.nonzero(dist <= kth)[0]
        order = np.argsort(dist[cand], kind="mergesort")
        for q in range(kk):
            c = cand[order[q]]
            idx[i, q] = c
            sq[i, q] = dist[c]
    return idx, sq


@njit(cache=True)
def nearest_higher(coords, rank):
    N, M = coords.shape
    rho = np.full(N, np.inf)
    parent = np.full(N, -1, dtype=np.int64)
    for x in range(N):
        rx = rank[x]
        if rx == 0:
            continue
        best = np.inf
        bi = -1
        for y in range(N):
            if rank[y] >= rx:
                continue
            s = 0.0
            for m in range(M):
                d = coords[x, m] - coords[y, m]
                s += d * d
            if s < best:
                best = s
                bi = y
        rho[x] = np.sqrt(best)
        parent[x] = bi
    return rho, parent


@njit(cache=True)
def _consensus(labels, x, W, H, offsets, threshold, counts):
    ci = x // W
    cj = x - ci * W
    counts[:] = 0
    total = 0
    for o in range(offsets.shape[0]):
        ii = ci + offsets[o, 0]
        jj = cj + offsets[o, 1]
        if ii < 0 or ii >= H or jj < 0 or jj >= W:
            continue
        lab = labels[ii * W + jj]
        if lab > 0:
            counts[lab] += 1
            total += 1
    if total == 0:
        return 0
    best = 0
    for lab in range(1, counts.shape[0]):
        if counts[lab] > counts[best]:
            best = lab
    if best > 0 and counts[best] > threshold * total:
        return best
    return 0


@njit(cache=True)
def _nearest_labeled(labels, order, pos, coords, x):
    M = coords.shape[1]
    best = np.inf
    bi = -1
    for q in range(pos):
        y = order[q]
        if labels[y] == 0:
            continue
        s = 0.0
        for m in range(M):
            d = coords[x, m] - coords[y, m]
            s += d * d
        if s < best or (s == best and y < bi):
            best = s
            bi = y
    return bi


@njit(cache=True)
def propagate(labels, prov, order, parent, coords, H, W, offsets, threshold, stage):
    n_labels = 0
    for x in range(labels.shape[0]):
        if labels[x] > n_labels:
            n_labels = labels[x]
    counts = np.zeros(n_labels + 1, dtype=np.int64)
    use_consensus = threshold <= 1.0 and offsets.shape[0] > 0
    visited = 0
    for pos in range(order.shape[0]):
        x = order[pos]
        if labels[x] != 0:
            continue
        visited += 1
        cons = 0
        if use_consensus:
            cons = _consensus(labels, x, W, H, offsets, threshold, counts)
        if stage == 2 and cons != 0:
            labels[x] = cons
            prov[x] = STAGE2_CONSENSUS
            continue
        p = parent[x]
        if p >= 0 and labels[p] != 0:
            nb = p
        else:
            nb = _nearest_labeled(labels, order, pos, coords, x)
        if nb < 0:
            raise RuntimeError("no labeled pixel of higher density")
        cand = labels[nb]
        if stage == 1:
            if cons != 0 and cons != cand:
                continue
            labels[x] = cand
            prov[x] = STAGE1_SPECTRAL
        else:
            labels[x] = cand
            prov[x] = STAGE2_SPECTRAL
    return visited
