# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the queue simulator.

Mirrors :mod:`dfrcount._pykernels`; both are exercised by the test suite.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lindley(const double[::1] service, const double[::1] interarrival, double w0=0.0):
    """Waiting times ``W[k+1] = max(W[k] + B[k] - A[k+1], 0)``, ``W[0] = w0``.

    ``interarrival[k]`` is the gap between arrivals ``k`` and ``k + 1``.
    """
    cdef Py_ssize_t n = service.shape[0]
    if interarrival.shape[0] < n - 1:
        raise ValueError("need at least len(service) - 1 interarrival gaps")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    cdef double cur = w0
    cdef Py_ssize_t k
    if n == 0:
        return out
    w[0] = cur
    for k in range(n - 1):
        cur = cur + service[k] - interarrival[k]
        if cur < 0.0:
            cur = 0.0
        w[k + 1] = cur
    return out


def level_durations(const double[::1] up, const double[::1] down,
                    const double[::1] edges, Py_ssize_t max_level):
    """Time spent at each level of ``#{up <= t} - #{down <= t}`` per batch.

    ``up`` and ``down`` must be sorted.  Batch ``b`` covers
    ``[edges[b], edges[b+1])``; levels above ``max_level`` are pooled into
    the last column.
    """
    cdef Py_ssize_t nu = up.shape[0], nd = down.shape[0], ne = edges.shape[0]
    if ne < 2:
        raise ValueError("need at least two batch edges")
    out = np.zeros((ne - 1, max_level + 1), dtype=np.float64)
    cdef double[:, ::1] acc = out
    cdef Py_ssize_t i = 0, j = 0, b = 0
    cdef long level = 0
    cdef double t = edges[0], nxt, lo, hi, inf = float("inf")
    cdef Py_ssize_t col
    # state at the first edge
    while i < nu and up[i] <= t:
        i += 1
        level += 1
    while j < nd and down[j] <= t:
        j += 1
        level -= 1
    while b < ne - 1:
        nxt = inf
        if i < nu and up[i] < nxt:
            nxt = up[i]
        if j < nd and down[j] < nxt:
            nxt = down[j]
        # spread the interval [t, nxt) over the batches it crosses
        col = level if level < max_level else max_level
        if col < 0:
            col = 0
        while b < ne - 1:
            lo = t if t > edges[b] else edges[b]
            hi = nxt if nxt < edges[b + 1] else edges[b + 1]
            if hi > lo:
                acc[b, col] += hi - lo
            if nxt >= edges[b + 1]:
                b += 1
            else:
                break
        if nxt == inf:
            break
        t = nxt
        while i < nu and up[i] <= t:
            i += 1
            level += 1
        while j < nd and down[j] <= t:
            j += 1
            level -= 1
    return out
