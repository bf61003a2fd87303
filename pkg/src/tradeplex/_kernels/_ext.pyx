# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Every function mirrors one in ``_pure.py`` operation for
operation, so both backends return bit-identical results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from scipy.special.cython_special cimport ndtr

cnp.import_array()


def ks2_stat(const double[::1] a, const double[::1] b):
    """Two-sample KS distance of two ascending samples (merge walk)."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double x, diff, d = 0.0
    with nogil:
        while i < n and j < m:
            x = a[i] if a[i] <= b[j] else b[j]
            while i < n and a[i] <= x:
                i += 1
            while j < m and b[j] <= x:
                j += 1
            diff = fabs(<double>i / n - <double>j / m)
            if diff > d:
                d = diff
    return d


def normal_gap_rows(const double[:, ::1] xs, const double[::1] mu, const double[::1] sd):
    """Per row of an ascending sample matrix, the sup gap between the ECDF
    (evaluated at x- and x) and the normal CDF with that row's mu, sd."""
    cdef Py_ssize_t reps = xs.shape[0], n = xs.shape[1]
    cdef Py_ssize_t r, k, e
    cdef double x, F, g, d
    out = np.empty(reps, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for r in range(reps):
            d = 0.0
            k = 0
            while k < n:
                x = xs[r, k]
                e = k + 1
                while e < n and xs[r, e] == x:
                    e += 1
                F = ndtr((x - mu[r]) / sd[r])
                g = fabs(<double>k / n - F)
                if g > d:
                    d = g
                g = fabs(<double>e / n - F)
                if g > d:
                    d = g
                k = e
            res[r] = d
    return out


def neumaier_gram(const double[:, ::1] X):
    """Upper-triangle Gram matrix of the rows of X with Neumaier-compensated
    accumulation; the lower triangle is mirrored."""
    cdef Py_ssize_t C = X.shape[0], M = X.shape[1]
    cdef Py_ssize_t a, b, k
    cdef double s, c, p, t
    out = np.zeros((C, C), dtype=np.float64)
    cdef double[:, ::1] G = out
    with nogil:
        for a in range(C):
            for b in range(a, C):
                s = 0.0
                c = 0.0
                for k in range(M):
                    p = X[a, k] * X[b, k]
                    t = s + p
                    if fabs(s) >= fabs(p):
                        c = c + ((s - t) + p)
                    else:
                        c = c + ((p - t) + s)
                    s = t
                G[a, b] = s + c
                G[b, a] = G[a, b]
    return out


cdef inline Py_ssize_t _find(cnp.int64_t[::1] parent, Py_ssize_t x) noexcept nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def union_find_labels(Py_ssize_t n, const cnp.int64_t[::1] src, const cnp.int64_t[::1] dst):
    """Component label per node; the label is the smallest member index."""
    labels = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] parent = labels
    cdef Py_ssize_t e, ra, rb, i
    with nogil:
        for e in range(src.shape[0]):
            ra = _find(parent, src[e])
            rb = _find(parent, dst[e])
            if ra < rb:
                parent[rb] = ra
            elif rb < ra:
                parent[ra] = rb
        for i in range(n):
            parent[i] = _find(parent, i)
    return labels


def complete_linkage_merges(const double[:, ::1] dist, const cnp.int64_t[::1] rank):
    """Complete-linkage agglomeration with the max Lance-Williams update.

    Ties on height go to the cluster pair whose (smaller, larger) minimum
    leaf ranks is lexicographically smallest. Returns arrays
    (a, b, height, size) of length n - 1; ``a`` is the side with the smaller
    minimum rank, new clusters are numbered n, n + 1, ...
    """
    cdef Py_ssize_t n = dist.shape[0]
    D_arr = np.array(dist, dtype=np.float64, copy=True)
    cdef double[:, ::1] D = D_arr
    active_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] active = active_arr
    minrank_arr = np.array(rank, dtype=np.int64, copy=True)
    cdef cnp.int64_t[::1] minrank = minrank_arr
    cid_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cid = cid_arr
    size_arr = np.ones(n, dtype=np.int64)
    cdef cnp.int64_t[::1] size = size_arr

    cdef Py_ssize_t steps = n - 1 if n > 0 else 0
    out_a = np.empty(steps, dtype=np.int64)
    out_b = np.empty(steps, dtype=np.int64)
    out_h = np.empty(steps, dtype=np.float64)
    out_s = np.empty(steps, dtype=np.int64)
    cdef cnp.int64_t[::1] oa = out_a, ob = out_b, osz = out_s
    cdef double[::1] oh = out_h

    cdef Py_ssize_t step, i, j, k, p, q, bi, bj
    cdef double best, dij
    cdef cnp.int64_t lo, hi, blo, bhi
    with nogil:
        for step in range(steps):
            bi = -1
            bj = -1
            best = 0.0
            blo = 0
            bhi = 0
            for i in range(n):
                if not active[i]:
                    continue
                for j in range(i + 1, n):
                    if not active[j]:
                        continue
                    dij = D[i, j]
                    if minrank[i] < minrank[j]:
                        lo = minrank[i]
                        hi = minrank[j]
                    else:
                        lo = minrank[j]
                        hi = minrank[i]
                    if (bi < 0 or dij < best or
                            (dij == best and (lo < blo or (lo == blo and hi < bhi)))):
                        bi = i
                        bj = j
                        best = dij
                        blo = lo
                        bhi = hi
            if minrank[bi] < minrank[bj]:
                p = bi
                q = bj
            else:
                p = bj
                q = bi
            oa[step] = cid[p]
            ob[step] = cid[q]
            oh[step] = best
            osz[step] = size[p] + size[q]
            for k in range(n):
                if active[k] and k != p and k != q:
                    if D[q, k] > D[p, k]:
                        D[p, k] = D[q, k]
                        D[k, p] = D[q, k]
            active[q] = 0
            size[p] = size[p] + size[q]
            cid[p] = n + step
            if minrank[q] < minrank[p]:
                minrank[p] = minrank[q]
    return out_a, out_b, out_h, out_s
