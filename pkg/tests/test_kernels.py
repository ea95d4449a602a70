import os
import subprocess
import sys

import numpy as np
import pytest

from dfrcount import _pykernels, kernels

try:
    from dfrcount import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def lindley_loop(service, gaps, w0=0.0):
    w = np.empty(len(service))
    w[0] = w0
    for k in range(1, len(service)):
        w[k] = max(w[k - 1] + service[k - 1] - gaps[k - 1], 0.0)
    return w


def durations_loop(up, down, edges, max_level):
    events = sorted([(t, 1) for t in up] + [(t, -1) for t in down])
    out = np.zeros((len(edges) - 1, max_level + 1))
    level, prev = 0, edges[0]
    times = [t for t, _ in events] + [edges[-1]]
    # walk the piecewise-constant level over [edges[0], edges[-1])
    grid = np.unique(np.concatenate([edges, [t for t in times if edges[0] < t < edges[-1]]]))
    for a, b in zip(grid[:-1], grid[1:]):
        lv = sum(1 for t in up if t <= a) - sum(1 for t in down if t <= a)
        bi = np.searchsorted(edges, a, side="right") - 1
        out[bi, min(lv, max_level)] += b - a
    return out


def random_queue(seed, n=300):
    rng = np.random.default_rng(seed)
    service = rng.exponential(0.8, n)
    gaps = rng.exponential(1.0, n)
    w = lindley_loop(service, gaps)
    arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    starts = arrivals + w
    return service, gaps, arrivals, starts, starts + service


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_lindley_matches_loop(impl):
    service, gaps, *_ = random_queue(1)
    np.testing.assert_allclose(impl.lindley(service, gaps), lindley_loop(service, gaps),
                               atol=1e-9)
    np.testing.assert_allclose(impl.lindley(service, gaps, 2.0),
                               lindley_loop(service, gaps, 2.0), atol=1e-9)


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_level_durations_match_loop(impl):
    _, _, arrivals, starts, deps = random_queue(2, 80)
    edges = np.linspace(arrivals[5], arrivals[-1], 4)
    for down in (starts, deps):
        got = impl.level_durations(arrivals, np.sort(down), edges, 6)
        np.testing.assert_allclose(got, durations_loop(arrivals, np.sort(down), edges, 6),
                                   atol=1e-9)
        np.testing.assert_allclose(got.sum(axis=1), np.diff(edges), rtol=1e-12)


@needs_ext
def test_backends_agree_large():
    service, gaps, arrivals, starts, deps = random_queue(3, 200_000)
    np.testing.assert_allclose(_ckernels.lindley(service, gaps), _pykernels.lindley(service, gaps),
                               atol=1e-8)
    edges = np.linspace(arrivals[1000], arrivals[-1], 26)
    np.testing.assert_allclose(_ckernels.level_durations(arrivals, deps, edges, 60),
                               _pykernels.level_durations(arrivals, deps, edges, 60), atol=1e-8)


def test_pure_python_switch():
    env = dict(os.environ, DFRCOUNT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dfrcount import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
