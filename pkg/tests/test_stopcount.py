import json
import math

import numpy as np
import pytest

import oracles
from dfrcount.distmodel import Deterministic, Exponential, Uniform, ZeroInflated
from dfrcount.procgen import iid_renewal, product, yule
from dfrcount.stopcount import (
    HazardSequence,
    Moments,
    TailEstimate,
    check_ddfr,
    check_lemma1,
    check_monotone,
    estimate_tails_conditional,
    estimate_tails_direct,
)

POISSON = iid_renewal(Exponential(1.0))
T1 = Exponential(1.0)


def within(est, ref, k=3.0):
    n = np.arange(ref.size)
    return np.all(np.abs(est.q[n] - ref) <= k * est.se[n] + 1e-12)


def test_conditional_poisson_geometric():
    est = estimate_tails_conditional(POISSON, T1, n_max=12, reps=100_000, rng=1)
    ref = np.array([oracles.stopped_poisson_tail(n) for n in range(13)])
    assert est.q[0] == 1.0
    assert within(est, ref)
    assert est.estimator == "conditional"


def test_conditional_yule():
    est = estimate_tails_conditional(yule(1.0), T1, n_max=20, reps=100_000, rng=2)
    ref = np.array([oracles.stopped_pure_birth_tail(n, lambda k: k) for n in range(21)])
    assert within(est, ref)


def test_q0_is_one_everywhere():
    est = estimate_tails_conditional(product(Uniform(0, 1)), T1, n_max=5, reps=1000, rng=0)
    assert est.q[0] == 1.0 and est.se[0] == 0.0
    with pytest.raises(ValueError):
        TailEstimate(np.array([0.9, 0.5]), np.zeros(2), 1, "x")


def test_direct_poisson_first_entry():
    est = estimate_tails_direct(POISSON, T1, n_max=10, reps=100_000, rng=3)
    assert abs(est.q[1] - 0.5) <= 3 * est.se[1]


def test_direct_deterministic():
    est = estimate_tails_direct(iid_renewal(Deterministic(1.0)), Deterministic(2.5),
                                n_max=5, reps=100, rng=0)
    np.testing.assert_array_equal(est.q, [1, 1, 1, 0, 0, 0])
    assert est.details["truncated_fraction"] == 0.0


def test_direct_accepts_sampler():
    est = estimate_tails_direct(iid_renewal(Deterministic(1.0)),
                                lambda g, size: np.full(size, 1.5), n_max=3, reps=10, rng=0)
    np.testing.assert_array_equal(est.q, [1, 1, 0, 0])


def test_conditional_direct_agree():
    a = estimate_tails_conditional(POISSON, T1, n_max=8, reps=50_000, rng=4)
    b = estimate_tails_direct(POISSON, T1, n_max=8, reps=50_000, rng=5)
    comb = np.sqrt(a.se**2 + b.se**2)
    assert np.all(np.abs(a.q - b.q) <= 3 * comb + 1e-15)


def test_reps_too_small():
    with pytest.raises(ValueError):
        estimate_tails_conditional(POISSON, T1, n_max=3, reps=1)


def test_auto_trim_noise_floor():
    est = estimate_tails_conditional(POISSON, T1, reps=20_000, rng=6)
    assert est.n_max < 50
    assert np.all(est.usable()[: est.n_max + 1])


def test_log_scale_deep_tail():
    # sf_T(S_n) far below double range for moderate n
    est = estimate_tails_conditional(iid_renewal(Deterministic(200.0)), Exponential(5.0),
                                     n_max=3, reps=100, rng=0)
    assert est.q[1] == 0.0
    np.testing.assert_allclose(est.log_q[1:], [-1000.0, -2000.0, -3000.0])


def test_ddfr_geometric_equality():
    q = 0.5 ** np.arange(15)
    v = check_ddfr(TailEstimate.from_tails(q))
    assert v.holds
    assert v.margin == pytest.approx(0.0, abs=1e-15)


def test_ddfr_yule_holds():
    q = 1.0 / (np.arange(20) + 1.0)
    assert check_ddfr(TailEstimate.from_tails(q)).holds


def test_ddfr_poisson_fixture_fails():
    q = oracles.poisson_tails(2.0, 4)
    v = check_ddfr(TailEstimate.from_tails(q))
    assert v.fails
    assert v.witness["n"] == 0
    assert v.witness["lhs"] == pytest.approx(0.7477, abs=1e-4)
    assert v.witness["rhs"] == pytest.approx(0.5940, abs=1e-4)


def test_ddfr_too_few_entries():
    assert check_ddfr(TailEstimate.from_tails([1.0, 0.5])).status == "inconclusive"
    v = check_ddfr(TailEstimate.from_tails([1.0, 0.5, 0.0, 0.0]))
    assert v.status == "inconclusive"
    assert v.details["excluded"] == [2, 3]


def test_ddfr_noise_band():
    q = np.array([1.0, 0.5, 0.26, 0.125])
    se = np.array([0.0, 0.005, 0.005, 0.005])
    assert check_ddfr(TailEstimate.from_tails(q, se)).holds
    assert check_ddfr(TailEstimate.from_tails(q)).fails


def test_ddfr_matches_hazard():
    for q in [0.5 ** np.arange(8), 1 / (np.arange(8) + 1.0), oracles.poisson_tails(2.0, 7)]:
        t = TailEstimate.from_tails(q)
        assert check_ddfr(t).holds == t.hazard().is_nonincreasing(1e-12)


def test_hazard_values():
    h = TailEstimate.from_tails([1.0, 0.5, 0.0, 0.0]).hazard()
    assert h.h[0] == 0.5 and h.h[1] == 1.0 and np.isnan(h.h[2])
    assert isinstance(h, HazardSequence)


def test_monotone_detector():
    assert check_monotone(TailEstimate.from_tails([1.0, 0.5, 0.6])).fails
    assert check_monotone(TailEstimate.from_tails([1.0, 0.5, 0.5])).holds


def test_moments_merge_equals_pooled():
    rng = np.random.default_rng(0)
    v = rng.random((1000, 3))
    whole = Moments.from_values(v)
    parts = Moments.combine([Moments.from_values(v[:300]), Moments.from_values(v[300:])])
    for a, b in zip(whole.estimates(), parts.estimates()):
        np.testing.assert_allclose(a, b, rtol=1e-12)
    np.testing.assert_allclose(whole.estimates()[2], np.cov(v.T) / 1000, rtol=1e-12)


def test_lemma1_exponential_equality():
    v = check_lemma1(POISSON, T1, reps=100_000, rng=7, n_max=6)
    assert v.holds
    e = v.details["expectations"]
    se = v.details["se"]
    assert abs(e[0] - 0.5) < 3 * se[0]
    assert abs(e[1] - 0.25) < 3 * se[1]


def test_lemma1_product_process():
    v = check_lemma1(product(Uniform(0, 1)), T1, reps=50_000, rng=8, n_max=6)
    assert v.holds
    e, se = v.details["expectations"][0], v.details["se"][0]
    assert abs(e - oracles.uniform_exp_laplace()) < 3 * se
    assert e == pytest.approx(1 - math.exp(-1), abs=0.01)


def test_lemma1_joint_atom():
    proc = iid_renewal(ZeroInflated(Exponential(1.0), 0.2))
    v = check_lemma1(proc, ZeroInflated(Exponential(1.0), 0.3), reps=100)
    assert v.fails
    assert v.witness["joint_zero_atom"] == pytest.approx(0.06)


def test_serialization():
    est = TailEstimate.from_tails([1.0, 0.5, 0.25], [0.0, 0.01, 0.02])
    lines = est.to_csv().splitlines()
    assert lines[0] == "n,q,se"
    assert lines[2] == "1,0.5,0.01"
    d = json.loads(est.to_json())
    assert d["q"] == [1.0, 0.5, 0.25]
    assert est.truncate(1).q.tolist() == [1.0, 0.5]
