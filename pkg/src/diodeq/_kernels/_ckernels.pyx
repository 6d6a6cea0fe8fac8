# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: brute-force neighbour search and exact split scan.

Both functions must agree with their counterparts in ``_pykernels`` bit for
bit on neighbour indices and chosen splits.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt, INFINITY

cnp.import_array()


cdef inline double _dist(const double[:, ::1] a, Py_ssize_t i,
                         const double[:, ::1] b, Py_ssize_t j,
                         Py_ssize_t d, double p, int mode) noexcept nogil:
    cdef Py_ssize_t c
    cdef double acc = 0.0, t
    if mode == 0:  # chebyshev
        for c in range(d):
            t = fabs(a[i, c] - b[j, c])
            if t > acc:
                acc = t
        return acc
    if mode == 1:
        for c in range(d):
            acc += fabs(a[i, c] - b[j, c])
        return acc
    if mode == 2:
        for c in range(d):
            t = a[i, c] - b[j, c]
            acc += t * t
        return sqrt(acc)
    if mode == 4:
        for c in range(d):
            t = a[i, c] - b[j, c]
            t = t * t
            acc += t * t
        return pow(acc, 0.25)
    for c in range(d):
        acc += pow(fabs(a[i, c] - b[j, c]), p)
    return pow(acc, 1.0 / p)


def knn_search(train, queries, Py_ssize_t k, double p):
    """k nearest training rows per query; ties go to the lower row index."""
    cdef const double[:, ::1] tr = np.ascontiguousarray(train, dtype=np.float64)
    cdef const double[:, ::1] qu = np.ascontiguousarray(queries, dtype=np.float64)
    cdef Py_ssize_t n = tr.shape[0], m = qu.shape[0], d = tr.shape[1]
    cdef int mode
    if p == INFINITY:
        mode = 0
    elif p == 1.0:
        mode = 1
    elif p == 2.0:
        mode = 2
    elif p == 4.0:
        mode = 4
    else:
        mode = 3
    idx_arr = np.empty((m, k), dtype=np.int64)
    dist_arr = np.empty((m, k), dtype=np.float64)
    cdef long long[:, ::1] idx = idx_arr
    cdef double[:, ::1] dist = dist_arr
    cdef Py_ssize_t qi, j, pos, filled
    cdef double dj
    with nogil:
        for qi in range(m):
            filled = 0
            for j in range(n):
                dj = _dist(qu, qi, tr, j, d, p, mode)
                if filled == k and dj >= dist[qi, k - 1]:
                    continue
                if filled < k:
                    pos = filled
                    filled += 1
                else:
                    pos = k - 1
                # strict comparison keeps earlier (lower index) entries first
                while pos > 0 and dist[qi, pos - 1] > dj:
                    dist[qi, pos] = dist[qi, pos - 1]
                    idx[qi, pos] = idx[qi, pos - 1]
                    pos -= 1
                dist[qi, pos] = dj
                idx[qi, pos] = j
    return idx_arr, dist_arr


def best_split(X, y, order, Py_ssize_t min_leaf):
    """Best variance-reduction split over all features.

    ``order`` holds a stable argsort of every column of ``X``. Returns
    ``(feature, threshold, gain)``; feature is -1 when no admissible split
    exists.
    """
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long long[:, ::1] o = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], nf = x.shape[1]
    cdef Py_ssize_t f, i, best_f = -1
    cdef double total, left, right, score, parent
    cdef double best_score = -INFINITY, best_thr = 0.0
    if n < 2 * min_leaf or n < 2:
        return -1, 0.0, 0.0
    with nogil:
        for f in range(nf):
            total = 0.0
            for i in range(n):
                total += yy[o[i, f]]
            left = 0.0
            for i in range(1, n):
                left += yy[o[i - 1, f]]
                if i < min_leaf or n - i < min_leaf:
                    continue
                if not (x[o[i - 1, f], f] < x[o[i, f], f]):
                    continue
                right = total - left
                score = left * left / i + right * right / (n - i)
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = 0.5 * (x[o[i - 1, f], f] + x[o[i, f], f])
                    if best_thr >= x[o[i, f], f]:  # adjacent floats: midpoint rounds up
                        best_thr = x[o[i - 1, f], f]
        if best_f >= 0:
            total = 0.0
            for i in range(n):
                total += yy[i]
    if best_f < 0:
        return -1, 0.0, 0.0
    parent = total * total / n
    return int(best_f), float(best_thr), float(best_score - parent)
