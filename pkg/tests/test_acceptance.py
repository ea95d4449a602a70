"""Acceptance criteria 1-9, one test each, with pinned seeds and tolerances."""

import json
import textwrap
import time

import numpy as np
import pytest

import oracles
from dfrcount.cli import parse_config, run_experiment
from dfrcount.distmodel import (
    Exponential,
    ExponentialMixture,
    Uniform,
    Weibull,
    check_class,
    make_mixture_exponentials,
)
from dfrcount.ordassoc import check_theorem1
from dfrcount.procgen import independent, iid_renewal, product, reciprocal_sum, yule
from dfrcount.queuesim import (
    QueueSpec,
    littles_cross_check,
    simulate_queue,
    sojourn_stopped_count,
)
from dfrcount.stopcount import (
    TailEstimate,
    check_ddfr,
    estimate_tails_conditional,
    estimate_tails_direct,
)

K_SE = 3.0
T_EXP = Exponential(1.0)
T_MIX = make_mixture_exponentials([0.5, 0.5], [1.0, 3.0])


def theorem1_processes():
    return {
        "a iid Exp(1)": iid_renewal(Exponential(1.0)),
        "b Weibull(0.5)/n": independent(lambda n: Weibull(0.5, 1.0 / n),
                                         scaled=(Weibull(0.5), lambda n: 1.0 / n)),
        "c product U(0,1)": product(Uniform(0.0, 1.0)),
        "d reciprocal z=1 Exp(1)": reciprocal_sum(Exponential(1.0), 1.0),
    }


def max_ratio(est, ref):
    n = np.arange(1, ref.size)
    return float(np.max(np.abs(est.q[n] - ref[n]) / est.se[n]))


def agreement(a, b):
    m = min(a.n_max, b.n_max)
    n = np.arange(1, m + 1)
    n = n[a.usable()[n] & b.usable()[n]]
    comb = np.sqrt(a.se[n] ** 2 + b.se[n] ** 2)
    return float(np.max(np.abs(a.q[n] - b.q[n]) / comb))


def test_1_geometric_oracle(criterion):
    t0 = time.perf_counter()
    est = estimate_tails_conditional(iid_renewal(Exponential(1.0)), T_EXP, n_max=12,
                                     reps=100_000, rng=20240101)
    elapsed = time.perf_counter() - t0
    ref = np.array([oracles.stopped_poisson_tail(n) for n in range(13)])
    np.testing.assert_allclose(ref, 0.5 ** np.arange(13), rtol=1e-9)
    r = max_ratio(est, ref)
    dd = check_ddfr(est)
    ok = r <= K_SE and dd.holds and elapsed <= 30
    assert criterion(1, "geometric oracle", ok,
                     f"max |q-2^-n|/se = {r:.2f}, ddfr {dd.status}, {elapsed:.2f}s")


def test_2_yule_oracle(criterion):
    t0 = time.perf_counter()
    est = estimate_tails_conditional(yule(1.0), T_EXP, n_max=20, reps=100_000, rng=20240102)
    elapsed = time.perf_counter() - t0
    ref = np.array([oracles.stopped_pure_birth_tail(n, lambda k: k) for n in range(21)])
    np.testing.assert_allclose(ref, 1.0 / (np.arange(21) + 1), rtol=1e-9)
    r = max_ratio(est, ref)
    dd = check_ddfr(est)
    ok = r <= K_SE and dd.holds and elapsed <= 30
    assert criterion(2, "Yule oracle", ok,
                     f"max |q-1/(n+1)|/se = {r:.2f}, ddfr {dd.status}, {elapsed:.2f}s")


def test_3_negative_control(criterion):
    q = oracles.poisson_tails(2.0, 6)
    v = check_ddfr(TailEstimate.from_tails(q))
    w = v.witness or {}
    ok = (v.fails and w.get("n") == 0 and abs(w["lhs"] - 0.7477) < 5e-4
          and abs(w["rhs"] - 0.5940) < 5e-4)
    assert criterion(3, "Poisson(2) negative control", ok,
                     f"{v.status} at n={w.get('n')}: {w.get('lhs', 0):.4f} > {w.get('rhs', 0):.4f}")


@pytest.mark.slow
def test_4_theorem1_suite(criterion):
    t0 = time.perf_counter()
    bad, runs = [], 0
    for pname, proc in theorem1_processes().items():
        for tname, T in [("Exp(1)", T_EXP), ("mixture", T_MIX)]:
            for seed in (101, 202, 303):
                r = check_theorem1(proc, T, reps=50_000, rng=seed, confidence=0.99)
                runs += 1
                statuses = {k: v.status for k, v in r.verdicts().items()}
                if any(s != "holds" for s in statuses.values()) or r.ddfr == "fails":
                    bad.append((pname, tname, seed, statuses))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed <= 300
    assert criterion(4, "d-DFR theorem suite", ok,
                     f"{runs - len(bad)}/{runs} runs all holds, {elapsed:.2f}s"
                     + (f"; first problem {bad[0]}" if bad else ""))


def test_5_class_battery(criterion):
    t0 = time.perf_counter()
    checks = []
    dfr_models = {"Exp(1)": Exponential(1.0), "Weibull(0.5)": Weibull(0.5),
                  "mixture": ExponentialMixture([0.5, 0.5], [1.0, 3.0])}
    for name, m in dfr_models.items():
        for cls in ["DFR", "NWU", "NWUE", "IMRL"]:
            for analytic in (True, False):
                checks.append((name, cls, analytic, check_class(m, cls, analytic=analytic).holds))
    w2 = check_class(Weibull(2.0), "DFR", analytic=False)
    checks.append(("Weibull(2)", "DFR fails", False, w2.fails and w2.witness is not None))
    elapsed = time.perf_counter() - t0
    failed = [c for c in checks if not c[3]]
    ok = not failed and elapsed <= 10
    assert criterion(5, "class-checker battery", ok,
                     f"{len(checks) - len(failed)}/{len(checks)} checks, {elapsed:.2f}s")


@pytest.mark.slow
def test_6_mm1_closed_forms(criterion):
    t0 = time.perf_counter()
    q = QueueSpec(Exponential(0.5), Exponential(1.0))
    est = simulate_queue(q, 1_000_000, burn_in=10_000, rng=6060)
    t = np.linspace(0.25, 7.0, 10)
    p, se = est.waiting_survival(t)
    w_ratio = float(np.max(np.abs(p - 0.5 * np.exp(-0.5 * t)) / se))
    lq = est.queue_length_tails
    ref = oracles.mm1_waiting_queue_tails(0.5, 1.0, 8)
    n = np.arange(1, 9)
    l_ratio = float(np.max(np.abs(lq.q[n] - ref[n]) / lq.se[n]))
    l1 = abs(lq.q[1] - 0.25) / lq.se[1]
    dd = check_ddfr(lq)
    lv, rep = littles_cross_check(q, reps=100_000, rng=6061, estimate=est)
    elapsed = time.perf_counter() - t0
    ok = (w_ratio <= K_SE and l1 <= K_SE and l_ratio <= K_SE and dd.holds and lv.holds
          and rep["max_ratio"] < K_SE and elapsed <= 120)
    assert criterion(6, "M/M/1 closed forms", ok,
                     f"W {w_ratio:.2f} se, L*>=1 {l1:.2f} se, L* n<=8 {l_ratio:.2f} se, "
                     f"ddfr {dd.status}, Little max {rep['max_ratio']:.2f} se, {elapsed:.2f}s")


@pytest.mark.slow
def test_7_mg1_imrl_service(criterion):
    service = ExponentialMixture([0.5, 0.5], [1.0, 3.0])
    q = QueueSpec(Exponential(0.5 / service.mean), service)
    assert check_class(service, "IMRL").holds and abs(q.rho - 0.5) < 1e-12
    lines, ok = [], True
    for seed in (7001, 7002, 7003):
        est = simulate_queue(q, 1_000_000, burn_in=10_000, rng=seed)
        dd = check_ddfr(est.queue_length_tails)
        _, sv = sojourn_stopped_count(q, reps=100_000, rng=seed + 100, estimate=est)
        ok &= (not dd.fails) and sv.holds
        lines.append(f"{dd.status}/{sv.status}")
    assert criterion(7, "M/GI/1 IMRL service", ok, "L* ddfr / sojourn n>=2: " + ", ".join(lines))


def test_8_estimator_cross_validation(criterion):
    cases = {
        "1": (iid_renewal(Exponential(1.0)), T_EXP, 12),
        "2": (yule(1.0), T_EXP, 20),
        "4a-Exp": (iid_renewal(Exponential(1.0)), T_EXP, 12),
        "4a-mix": (iid_renewal(Exponential(1.0)), T_MIX, 12),
    }
    worst_ratio, ok = {}, True
    for i, (name, (proc, T, n_max)) in enumerate(cases.items()):
        a = estimate_tails_conditional(proc, T, n_max=n_max, reps=100_000, rng=8000 + i)
        b = estimate_tails_direct(proc, T, n_max=n_max, reps=100_000, rng=8100 + i)
        r = agreement(a, b)
        worst_ratio[name] = round(r, 2)
        ok &= r <= K_SE
    assert criterion(8, "conditional vs direct", ok, f"max |diff|/combined se {worst_ratio}")


def _cfg(body, workers):
    text = "schema_version: 1\n" + textwrap.dedent(body)
    return parse_config(text, overrides={"workers": workers})


def _report(cfg):
    rep = run_experiment(cfg, out=False).to_dict(runtime=False)
    rep["provenance"].pop("workers")
    return json.dumps(rep, sort_keys=True)


def test_9_determinism(criterion):
    bodies = {
        "ddfr": """
            scenario: ddfr
            seed: 9001
            reps: 50000
            estimator: both
            process: {variant: yule, rate: 1}
            T: {family: exponential, params: {rate: 1}}
        """,
        "theorem1": """
            scenario: theorem1
            seed: 9002
            reps: 20000
            assoc_reps: 5000
            process: {variant: product, Y: {family: uniform, params: {high: 1}}}
            T: {family: exponential-mixture, params: {weights: [0.5, 0.5], rates: [1, 3]}}
        """,
        "little": """
            scenario: little
            seed: 9003
            reps: 50000
            queue:
              arrival: {family: exponential, params: {rate: 0.5}}
              service: {family: exponential, params: {rate: 1}}
              customers: 200000
        """,
    }
    same = {}
    for name, body in bodies.items():
        a = _report(_cfg(body, 1))
        b = _report(_cfg(body, 1))
        c = _report(_cfg(body, 4))
        same[name] = a == b == c
    ok = all(same.values())
    assert criterion(9, "determinism and worker invariance", ok,
                     ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
