"""FIFO GI/GI/1 simulation and the distributional Little's law cross-check.

Waiting times come from the Lindley recursion.  Queue lengths are exact time
averages of the piecewise-constant occupancy process, computed from the
arrival, service-start and departure epochs.  Standard errors use batch
means over equal-length time windows (lengths) or equal-size customer groups
(waiting times), pooled over independent paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distmodel import Empirical, ModelError, SurvivalModel, check_class
from .procgen import equilibrium_renewal
from .stopcount import (
    Moments,
    TailEstimate,
    check_ddfr,
    estimate_tails,
    estimate_tails_conditional,
)
from .streams import as_seed_sequence, child, generator
from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict

__all__ = [
    "StabilityError",
    "QueueSpec",
    "QueuePath",
    "QueueEstimate",
    "simulate_path",
    "simulate_queue",
    "simulate_waiting_times",
    "queue_length_tails",
    "littles_cross_check",
    "sojourn_stopped_count",
    "DEFAULT_BURN_IN",
]

DEFAULT_BURN_IN = 10_000


class StabilityError(ModelError):
    pass


@dataclass(frozen=True)
class QueueSpec:
    arrival: SurvivalModel
    service: SurvivalModel
    discipline: str = "FIFO"

    def __post_init__(self):
        if self.discipline != "FIFO":
            raise ModelError(f"only FIFO is supported, got {self.discipline!r}")
        ea, eb = self.arrival.mean, self.service.mean
        if ea is None or eb is None:
            raise ModelError("arrival and service distributions need known means")
        if not eb < ea:
            raise StabilityError(f"stability of the queue requires E[B] < E[A]; "
                                 f"got E[B] = {eb:.6g} >= E[A] = {ea:.6g} (rho = {eb / ea:.6g})")

    @property
    def rho(self) -> float:
        return self.service.mean / self.arrival.mean

    def describe(self):
        return {"arrival": self.arrival.describe(), "service": self.service.describe(),
                "discipline": self.discipline, "rho": self.rho}


@dataclass(frozen=True)
class QueuePath:
    """One simulated path; the system starts empty with an arrival at time 0."""

    arrivals: np.ndarray
    waits: np.ndarray
    service: np.ndarray

    @property
    def starts(self):
        return self.arrivals + self.waits

    @property
    def departures(self):
        return self.starts + self.service

    def counts_at(self, t):
        """``(L, L_star, busy)`` at times ``t`` from the epoch counts."""
        t = np.asarray(t, dtype=float)
        a = np.searchsorted(self.arrivals, t, side="right")
        s = np.searchsorted(self.starts, t, side="right")
        d = np.searchsorted(self.departures, t, side="right")
        return a - d, a - s, s - d


def simulate_path(q: QueueSpec, n: int, gen: np.random.Generator) -> QueuePath:
    gaps = np.asarray(q.arrival.sample(gen, n), dtype=float)
    service = np.asarray(q.service.sample(gen, n), dtype=float)
    arrivals = np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    waits = kernels.lindley(np.ascontiguousarray(service), np.ascontiguousarray(gaps))
    return QueuePath(arrivals, np.asarray(waits), service)


@dataclass(frozen=True)
class QueueEstimate:
    """Post-burn-in stationary estimates pooled over independent paths."""

    spec: QueueSpec
    waiting_times: np.ndarray
    waiting_batch: np.ndarray
    queue_length_tails: TailEstimate
    sojourn_length_tails: TailEstimate
    burn_in: int
    horizon: int
    paths: int
    batches: int
    details: dict = field(default_factory=dict)

    @property
    def zero_frequency(self) -> float:
        return float(np.mean(self.waiting_times == 0.0))

    def waiting_survival(self, t):
        """Batch-means estimate of ``P(W > t)`` and its standard error."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        nb = int(self.waiting_batch.max()) + 1
        est = np.empty((nb, t.size))
        for b in range(nb):
            w = np.sort(self.waiting_times[self.waiting_batch == b])
            est[b] = 1.0 - np.searchsorted(w, t, side="right") / w.size
        return est.mean(axis=0), est.std(axis=0, ddof=1) / math.sqrt(nb)

    def zero_frequency_se(self) -> float:
        nb = int(self.waiting_batch.max()) + 1
        f = np.array([np.mean(self.waiting_times[self.waiting_batch == b] == 0)
                      for b in range(nb)])
        return float(f.std(ddof=1) / math.sqrt(nb))

    def waiting_model(self) -> Empirical:
        return Empirical(self.waiting_times, family="compound-geometric-empirical")

    def waiting_dfr_diagnostic(self, thin: int = 100) -> ClassVerdict:
        """DFR check of a thinned waiting-time sample; diagnostic only."""
        m = Empirical(self.waiting_times[::thin], family="compound-geometric-empirical")
        positive = m.samples[m.samples > 0]
        if positive.size < 100:
            return ClassVerdict(INCONCLUSIVE, notes=("too few positive waiting times",))
        grid = np.quantile(positive, np.linspace(0.0, 0.95, 24))
        return check_class(m, "DFR", grid=np.concatenate([[0.0], grid]))


def _tails_from_batches(fractions: np.ndarray, estimator: str) -> TailEstimate:
    # fractions: (batches, levels) time share at each level; tails by reverse cumsum
    tails = np.cumsum(fractions[:, ::-1], axis=1)[:, ::-1]
    tails[:, 0] = 1.0
    mom = Moments.from_values(tails[:, 1:])
    mean, _, cov = mom.estimates()
    full = np.zeros((tails.shape[1],) * 2)
    full[1:, 1:] = cov
    q = np.concatenate([[1.0], np.clip(mean, 0.0, 1.0)])
    return TailEstimate(q, np.sqrt(np.clip(np.diag(full), 0, None)), tails.shape[0],
                        estimator, cov=full)


def simulate_queue(q: QueueSpec, n_customers: int = 1_000_000, burn_in: int = DEFAULT_BURN_IN,
                   rng=0, *, paths: int = 4, batches: int = 25, max_level: int = 60,
                   workers: int = 1) -> QueueEstimate:
    """Simulate ``paths`` independent queues sharing ``n_customers`` post burn-in.

    Path ``p`` draws from child stream ``p`` of ``rng``.
    """
    if n_customers < paths * batches * 2:
        raise ValueError("too few customers for the requested paths and batches")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    seq = as_seed_sequence(rng)
    per_path = n_customers // paths

    def run(p):
        path = simulate_path(q, burn_in + per_path, generator(seq, p))
        w = path.waits[burn_in:]
        wb = np.minimum(np.arange(w.size) * batches // w.size, batches - 1)
        edges = np.linspace(path.arrivals[burn_in], path.arrivals[-1], batches + 1)
        lq = kernels.level_durations(path.arrivals, path.starts, edges, max_level)
        ls = kernels.level_durations(path.arrivals, path.departures, edges, max_level + 1)
        width = np.diff(edges)[:, None]
        return w, wb + p * batches, lq / width, ls / width

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(paths)))
    else:
        parts = [run(p) for p in range(paths)]
    waits = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    lq = np.concatenate([p[2] for p in parts])
    ls = np.concatenate([p[3] for p in parts])
    return QueueEstimate(
        spec=q, waiting_times=waits, waiting_batch=labels,
        queue_length_tails=_tails_from_batches(lq, "queue-time-average"),
        sojourn_length_tails=_tails_from_batches(ls, "queue-time-average"),
        burn_in=burn_in, horizon=per_path * paths, paths=paths, batches=batches,
        details={"kernel_backend": kernels.BACKEND, "rho": q.rho},
    )


def simulate_waiting_times(q: QueueSpec, n_customers: int = 1_000_000,
                           burn_in: int = DEFAULT_BURN_IN, rng=0, **kw) -> QueueEstimate:
    """Stationary waiting-time sample (plus the length estimates of the same paths)."""
    return simulate_queue(q, n_customers, burn_in, rng, **kw)


def queue_length_tails(q: QueueSpec, horizon: int = 1_000_000, burn_in: int = DEFAULT_BURN_IN,
                       rng=0, **kw) -> QueueEstimate:
    """Time-averaged tails of the number waiting ``L*`` and in system ``L``.

    ``horizon`` counts post-burn-in customers.  Same seed, same paths as
    :func:`simulate_waiting_times`.
    """
    return simulate_queue(q, horizon, burn_in, rng, **kw)


def littles_cross_check(q: QueueSpec, reps: int = 100_000, rng=0, *,
                        estimate: QueueEstimate | None = None, n_compare: int = 10,
                        k_se: float = 3.0, min_waits: int = 1000, workers: int = 1,
                        **sim_kw) -> tuple[ClassVerdict, dict]:
    """Compare simulated ``P(L* >= n)`` with the stopped equilibrium renewal count.

    The stopping time is the pooled stationary waiting-time sample, used as an
    empirical survival function and never coupled to the arrival paths of the
    renewal process.  Holds when every ``|diff| <= k_se * combined se`` for
    ``1 <= n <= n_compare``.
    """
    seq = as_seed_sequence(rng)
    if estimate is None:
        estimate = simulate_queue(q, rng=child(seq, 0), workers=workers, **sim_kw)
    if estimate.waiting_times.size < min_waits:
        v = ClassVerdict(INCONCLUSIVE, notes=("waiting-time sample too small",))
        return v, {}
    T = estimate.waiting_model()
    proc = equilibrium_renewal(q.arrival)
    stopped = estimate_tails_conditional(proc, T, n_max=n_compare, reps=reps,
                                         rng=child(seq, 1), workers=workers)
    lq = estimate.queue_length_tails
    m = min(n_compare, lq.n_max, stopped.n_max)
    n = np.arange(1, m + 1)
    diff = lq.q[n] - stopped.q[n]
    comb = np.sqrt(lq.se[n] ** 2 + stopped.se[n] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(comb > 0, np.abs(diff) / comb, np.where(diff == 0, 0.0, np.inf))
    report = {
        "n": n.tolist(),
        "queue": lq.q[n].tolist(),
        "queue_se": lq.se[n].tolist(),
        "stopped": stopped.q[n].tolist(),
        "stopped_se": stopped.se[n].tolist(),
        "diff": diff.tolist(),
        "combined_se": comb.tolist(),
        "max_abs_diff": float(np.max(np.abs(diff))) if m else 0.0,
        "max_ratio": float(np.max(ratio)) if m else 0.0,
        "k_se": k_se,
    }
    bad = np.flatnonzero(ratio > k_se)
    margin = float(np.min(k_se * comb - np.abs(diff))) if m else 0.0
    if bad.size:
        i = int(bad[np.argmax(ratio[bad])])
        witness = {"n": int(n[i]), "lhs": float(lq.q[n[i]]), "rhs": float(stopped.q[n[i]]),
                   "combined_se": float(comb[i])}
        return ClassVerdict(FAILS, witness=witness, margin=margin, details=report), report
    return ClassVerdict(HOLDS, margin=margin, details=report), report


def sojourn_stopped_count(q: QueueSpec, reps: int = 100_000, rng=0, *,
                          estimate: QueueEstimate | None = None, n_max: int | None = None,
                          confidence: float = 0.99, workers: int = 1,
                          **sim_kw) -> tuple[TailEstimate, ClassVerdict]:
    """Tails of ``N(T + B)`` for the equilibrium arrival process and their d-DFR check.

    Conditioning on the path and the service draw ``B`` gives the
    contribution ``P(W > S_n - B)`` from the waiting-time sample.  The verdict
    status covers ``n >= 2``; outcomes at ``n = 0, 1`` are reported in
    ``details["low_n"]`` without a pass/fail claim.
    """
    seq = as_seed_sequence(rng)
    if estimate is None:
        estimate = simulate_queue(q, rng=child(seq, 0), workers=workers, **sim_kw)
    W = estimate.waiting_model()
    proc = equilibrium_renewal(q.arrival)
    cap = 50 if n_max is None else int(n_max)

    def contrib(gen, size):
        S = np.cumsum(proc.sample(gen, cap, size), axis=1)
        B = np.asarray(q.service.sample(gen, size), dtype=float)
        return W.sf(S - B[:, None])

    tails = estimate_tails(contrib, cap, reps, child(seq, 1), estimator="conditional",
                           workers=workers, log_scale=False)
    if n_max is None:
        usable = tails.usable()
        bad = np.flatnonzero(~usable)
        if bad.size:
            tails = tails.truncate(max(int(bad[0]) - 1, 0))
    full = check_ddfr(tails, confidence)
    rows = full.details.get("inequalities", [])
    low = [r for r in rows if r["n"] < 2]
    high = [r for r in rows if r["n"] >= 2]
    details = {"low_n": low, "high_n": high, "excluded": full.details.get("excluded", [])}
    if not high:
        return tails, ClassVerdict(INCONCLUSIVE, notes=("fewer than 3 usable tail entries",),
                                   details=details)
    failing = [r for r in high if r["status"] == FAILS]
    margin = min(r["slack"] for r in high)
    if failing:
        r = failing[0]
        return tails, ClassVerdict(FAILS, witness={"n": r["n"], "lhs": r["lhs"], "rhs": r["rhs"]},
                                   margin=margin, details=details)
    return tails, ClassVerdict(HOLDS, margin=margin, details=details)
