"""Numpy implementations of the queue-simulation kernels.

Used when the compiled extension is unavailable, or when
``DFRCOUNT_PURE_PYTHON=1`` is set.
"""

import numpy as np


def lindley(service, interarrival, w0=0.0):
    """Waiting times ``W[k+1] = max(W[k] + B[k] - A[k+1], 0)``, ``W[0] = w0``.

    Uses the running-minimum form ``W[k] = C[k] - min(min_{j<=k} C[j], -w0)``
    with ``C`` the partial sums of ``B - A``.
    """
    service = np.asarray(service, dtype=float)
    interarrival = np.asarray(interarrival, dtype=float)
    n = service.size
    if interarrival.size < n - 1:
        raise ValueError("need at least len(service) - 1 interarrival gaps")
    if n == 0:
        return np.empty(0)
    steps = service[: n - 1] - interarrival[: n - 1]
    c = np.concatenate([[0.0], np.cumsum(steps)])
    floor = np.minimum(np.minimum.accumulate(c), -w0)
    return np.maximum(c - floor, 0.0)


def level_durations(up, down, edges, max_level):
    """Time spent at each level of ``#{up <= t} - #{down <= t}`` per batch."""
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2:
        raise ValueError("need at least two batch edges")
    start = (np.searchsorted(up, edges[0], side="right")
             - np.searchsorted(down, edges[0], side="right"))
    inside_u = up[(up > edges[0]) & (up < edges[-1])]
    inside_d = down[(down > edges[0]) & (down < edges[-1])]
    times = np.concatenate([inside_u, inside_d, edges[1:-1]])
    delta = np.concatenate([np.ones(inside_u.size), -np.ones(inside_d.size),
                            np.zeros(edges.size - 2)])
    order = np.argsort(times, kind="stable")
    times = np.concatenate([[edges[0]], times[order], [edges[-1]]])
    level = start + np.concatenate([[0.0], np.cumsum(delta[order])])
    dur = np.diff(times)
    batch = np.clip(np.searchsorted(edges, times[:-1], side="right") - 1, 0, edges.size - 2)
    col = np.clip(level, 0, max_level).astype(np.int64)
    out = np.bincount(batch * (max_level + 1) + col, weights=dur,
                      minlength=(edges.size - 1) * (max_level + 1))
    return out.reshape(edges.size - 1, max_level + 1)
