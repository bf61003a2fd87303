"""Pure-Python/numpy kernels.

Each function performs the same floating-point operations in the same order
as its compiled twin in ``_ext.pyx``; the two backends agree bit for bit.
"""

import numpy as np
from scipy.special import ndtr


def ks2_stat(a, b):
    """Two-sample KS distance of two ascending samples (merge walk)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, m = a.shape[0], b.shape[0]
    # ECDF counts at every point of the pooled support
    pooled = np.union1d(a, b)
    ia = np.searchsorted(a, pooled, side="right")
    jb = np.searchsorted(b, pooled, side="right")
    # the merge walk stops once either sample is exhausted
    stop = np.flatnonzero((ia >= n) | (jb >= m))
    if pooled.size == 0:
        return 0.0
    last = stop[0] + 1 if stop.size else pooled.size
    diff = np.abs(ia[:last] / n - jb[:last] / m)
    return float(max(diff.max(), 0.0))


def normal_gap_rows(xs, mu, sd):
    """Per row of an ascending sample matrix, the sup gap between the ECDF
    (evaluated at x- and x) and the normal CDF with that row's mu, sd."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    reps, n = xs.shape
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    F = ndtr((xs - mu[:, None]) / sd[:, None])
    if n == 0:
        return np.zeros(reps)
    ties = np.any(xs[:, 1:] == xs[:, :-1], axis=1) if n > 1 else np.zeros(reps, bool)
    lo = np.arange(n) / n
    hi = np.arange(1, n + 1) / n
    out = np.maximum(np.abs(lo - F), np.abs(hi - F)).max(axis=1)
    for r in np.flatnonzero(ties):
        row = xs[r]
        first = np.searchsorted(row, row, side="left")
        last = np.searchsorted(row, row, side="right")
        g = np.maximum(np.abs(first / n - F[r]), np.abs(last / n - F[r]))
        out[r] = g.max()
    return out


def neumaier_gram(X):
    """Upper-triangle Gram matrix of the rows of X with Neumaier-compensated
    accumulation; the lower triangle is mirrored."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C, M = X.shape
    ia, ib = np.triu_indices(C)
    s = np.zeros(ia.size)
    c = np.zeros(ia.size)
    Xt = np.ascontiguousarray(X.T)
    for k in range(M):
        col = Xt[k]
        p = col[ia] * col[ib]
        t = s + p
        c += np.where(np.abs(s) >= np.abs(p), (s - t) + p, (p - t) + s)
        s = t
    G = np.zeros((C, C))
    G[ia, ib] = s + c
    G[ib, ia] = G[ia, ib]
    return G


def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def union_find_labels(n, src, dst):
    """Component label per node; the label is the smallest member index."""
    parent = list(range(n))
    for a, b in zip(np.asarray(src).tolist(), np.asarray(dst).tolist()):
        ra, rb = _find(parent, a), _find(parent, b)
        if ra < rb:
            parent[rb] = ra
        elif rb < ra:
            parent[ra] = rb
    return np.array([_find(parent, i) for i in range(n)], dtype=np.int64)


def complete_linkage_merges(dist, rank):
    """Complete-linkage agglomeration with the max Lance-Williams update.

    Ties on height go to the cluster pair whose (smaller, larger) minimum
    leaf ranks is lexicographically smallest. Returns arrays
    (a, b, height, size) of length n - 1; ``a`` is the side with the smaller
    minimum rank, new clusters are numbered n, n + 1, ...
    """
    D = np.array(dist, dtype=np.float64, copy=True)
    n = D.shape[0]
    minrank = [int(r) for r in rank]
    cid = list(range(n))
    size = [1] * n
    active = list(range(n))
    steps = max(n - 1, 0)
    out_a = np.empty(steps, dtype=np.int64)
    out_b = np.empty(steps, dtype=np.int64)
    out_h = np.empty(steps, dtype=np.float64)
    out_s = np.empty(steps, dtype=np.int64)
    for step in range(steps):
        best = None
        for x, i in enumerate(active):
            for j in active[x + 1:]:
                lo, hi = sorted((minrank[i], minrank[j]))
                key = (D[i, j], lo, hi)
                if best is None or key < best[0]:
                    best = (key, i, j)
        (h, _, _), i, j = best
        p, q = (i, j) if minrank[i] < minrank[j] else (j, i)
        out_a[step], out_b[step] = cid[p], cid[q]
        out_h[step] = h
        out_s[step] = size[p] + size[q]
        for k in active:
            if k != p and k != q and D[q, k] > D[p, k]:
                D[p, k] = D[k, p] = D[q, k]
        active.remove(q)
        size[p] += size[q]
        cid[p] = n + step
        minrank[p] = min(minrank[p], minrank[q])
    return out_a, out_b, out_h, out_s
