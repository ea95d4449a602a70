import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dfrcount import _pykernels
from dfrcount.distmodel import (
    Exponential,
    ExponentialMixture,
    Uniform,
    Weibull,
    check_class,
    equilibrium_transform,
    residual_survival,
)
from dfrcount.ordassoc import check_stochastic_order
from dfrcount.stopcount import Moments, TailEstimate, check_ddfr
from dfrcount.streams import generator, map_blocks

try:
    from dfrcount import _ckernels
except ImportError:
    _ckernels = None

rates = st.floats(0.2, 5.0)
shapes_dfr = st.floats(0.3, 1.0)
shapes_any = st.floats(0.3, 4.0)


@st.composite
def mixtures(draw):
    k = draw(st.integers(2, 4))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    r = draw(st.lists(rates, min_size=k, max_size=k, unique=True))
    return ExponentialMixture(w / w.sum(), r)


dfr_models = st.one_of(mixtures(), st.builds(Weibull, shapes_dfr, st.floats(0.5, 2.0)),
                       st.builds(Exponential, rates))
any_models = st.one_of(dfr_models, st.builds(Weibull, shapes_any, st.floats(0.5, 2.0)),
                       st.builds(Uniform, st.just(0.0), st.floats(0.5, 3.0)))


@settings(max_examples=40, deadline=None)
@given(any_models)
def test_survival_monotone_and_bounded(m):
    t = np.sort(np.concatenate([[0.0], m.isf(np.linspace(0.999, 0.001, 50))]))
    s = m.sf(t)
    assert s[0] == 1.0 - m.zero_atom
    assert np.all(np.diff(s) <= 1e-15)
    assert np.all((s >= 0) & (s <= 1))


@settings(max_examples=15, deadline=None)
@given(dfr_models)
def test_dfr_implies_weaker_classes(m):
    grid = np.concatenate([[0.0], m.isf(np.geomspace(0.99, 0.01, 12))])
    assert check_class(m, "DFR", grid=grid, analytic=False).holds
    for cls in ["NWU", "NWUE", "IMRL"]:
        assert check_class(m, cls, grid=grid, analytic=False).holds


@settings(max_examples=20, deadline=None)
@given(dfr_models, st.floats(0.0, 3.0))
def test_residual_of_dfr_is_dfr(m, s):
    r = residual_survival(m, s)
    grid = np.concatenate([[0.0], r.isf(np.geomspace(0.99, 0.01, 16))])
    assert check_class(r, "DFR", grid=grid, analytic=False).holds


@settings(max_examples=20, deadline=None)
@given(st.one_of(mixtures(), st.builds(Weibull, shapes_any, st.floats(0.5, 2.0)),
                 st.builds(Uniform, st.floats(0.0, 1.0), st.floats(1.5, 3.0))))
def test_equilibrium_mean(m):
    e = equilibrium_transform(m)
    assert e.zero_atom == 0.0
    assert abs(e.mean - m.second_moment / (2 * m.mean)) < 1e-6 * max(1.0, e.mean)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4),
       st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4))
def test_geometric_mixture_tails_are_log_convex(ratios, weights):
    # q_n = sum_i w_i r_i^n is log-convex in n
    r = np.array(ratios)
    w = np.array(weights[: r.size])
    w = w / w.sum()
    q = (w[:, None] * r[:, None] ** np.arange(25)[None, :]).sum(axis=0)
    q[0] = 1.0
    assert check_ddfr(TailEstimate.from_tails(q)).holds


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=3, max_size=12))
def test_ddfr_agrees_with_hazard(hazards):
    h = np.array(hazards)
    q = np.concatenate([[1.0], np.cumprod(1 - h)])
    t = TailEstimate.from_tails(q)
    strict_up = np.any(np.diff(h) > 1e-9)
    v = check_ddfr(t)
    assert v.holds == (not strict_up) or abs(v.margin) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.integers(1, 299), st.integers(0, 2**32))
def test_moments_merge_any_split(n, cut, seed):
    cut = min(cut, n - 1)
    v = np.random.default_rng(seed).exponential(size=(n, 3))
    whole = Moments.from_values(v).estimates()
    if cut == 0:
        return
    parts = Moments.combine([Moments.from_values(v[:cut]), Moments.from_values(v[cut:])])
    for a, b in zip(whole, parts.estimates()):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 20_000), st.integers(1, 6), st.integers(0, 2**32))
def test_blocks_worker_invariant(reps, workers, seed):
    seq = np.random.SeedSequence(seed)

    def fn(i, size):
        return generator(seq, i).random(size).sum()

    assert map_blocks(fn, reps, 1) == map_blocks(fn, reps, workers)


@settings(max_examples=25, deadline=None)
@given(any_models)
def test_order_reflexive(m):
    assert check_stochastic_order(m, m).holds


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 400), st.floats(0.1, 0.95), st.integers(0, 2**32))
def test_kernel_backends_agree(n, load, seed):
    rng = np.random.default_rng(seed)
    service = rng.exponential(load, n)
    gaps = rng.exponential(1.0, n)
    w = _pykernels.lindley(service, gaps)
    assert np.all(w >= 0) and w[0] == 0.0
    arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    deps = np.sort(arrivals + w + service)
    edges = np.linspace(0.0, arrivals[-1], 4)
    d = _pykernels.level_durations(arrivals, deps, edges, 10)
    np.testing.assert_allclose(d.sum(axis=1), np.diff(edges), rtol=1e-10, atol=1e-12)
    if _ckernels is not None:
        np.testing.assert_allclose(_ckernels.lindley(service, gaps), w, atol=1e-9)
        np.testing.assert_allclose(_ckernels.level_durations(arrivals, deps, edges, 10), d,
                                   atol=1e-9)
