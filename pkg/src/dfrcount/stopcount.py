"""Distribution of a counting process stopped at an independent time ``T``.

Tails ``q_n = P(N(T) >= n)`` are estimated either by conditioning on the
arrival path, ``q_n = E[sf_T(S_n)]``, or directly by simulating ``T`` and
counting.  The conditional estimator only needs ``S_n`` and therefore works
for explosive processes whose count is defective.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distmodel import SurvivalModel
from .procgen import InterarrivalProcess, count_paths
from .streams import as_seed_sequence, generator, map_blocks, z_value
from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict

__all__ = [
    "TailEstimate",
    "HazardSequence",
    "Moments",
    "estimate_tails",
    "estimate_tails_conditional",
    "estimate_tails_direct",
    "check_ddfr",
    "check_lemma1",
    "check_monotone",
    "DEFAULT_N_CAP",
    "NOISE_FLOOR",
]

DEFAULT_N_CAP = 50
#: entries with q_n <= NOISE_FLOOR * se_n are too noisy for log-convexity checks
NOISE_FLOOR = 10.0


# ---------------------------------------------------------------- moments

@dataclass
class Moments:
    """Mean and centred cross-products of nonnegative columns, kept in log scale.

    Column ``j`` holds values ``exp(shift[j]) * u`` so that survival values
    far below the double range still average correctly.  Blocks merge with
    Chan's pairwise update; merging in a fixed order is bit-reproducible.
    """

    count: int
    shift: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_log(cls, logv: np.ndarray) -> Moments:
        logv = np.asarray(logv, dtype=float)
        shift = np.max(logv, axis=0)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        u = np.exp(logv - shift)
        mean = u.mean(axis=0)
        c = u - mean
        return cls(u.shape[0], shift, mean, c.T @ c)

    @classmethod
    def from_values(cls, v: np.ndarray) -> Moments:
        with np.errstate(divide="ignore"):
            return cls.from_log(np.log(np.asarray(v, dtype=float)))

    def _rescaled(self, shift):
        f = np.exp(self.shift - shift)
        return self.mean * f, self.m2 * np.outer(f, f)

    def merge(self, other: Moments) -> Moments:
        shift = np.maximum(self.shift, other.shift)
        ma, m2a = self._rescaled(shift)
        mb, m2b = other._rescaled(shift)
        n = self.count + other.count
        delta = mb - ma
        mean = ma + delta * (other.count / n)
        m2 = m2a + m2b + np.outer(delta, delta) * (self.count * other.count / n)
        return Moments(n, shift, mean, m2)

    @staticmethod
    def combine(parts) -> Moments:
        parts = list(parts)
        out = parts[0]
        for p in parts[1:]:
            out = out.merge(p)
        return out

    def estimates(self):
        """``(mean, log_mean, covariance of the mean)`` in natural scale."""
        f = np.exp(self.shift)
        with np.errstate(divide="ignore"):
            log_mean = self.shift + np.log(self.mean)
        cov = self.m2 / (self.count - 1) / self.count * np.outer(f, f)
        return self.mean * f, log_mean, cov


# ---------------------------------------------------------------- containers

@dataclass(frozen=True)
class HazardSequence:
    """Discrete failure rate ``h_n = (q_n - q_{n+1}) / q_n`` where ``q_n > 0``."""

    h: np.ndarray

    def is_nonincreasing(self, tol: float = 0.0) -> bool:
        h = self.h[np.isfinite(self.h)]
        return bool(np.all(np.diff(h) <= tol))


@dataclass(frozen=True)
class TailEstimate:
    """Estimated ``q_n = P(N(T) >= n)`` for ``n = 0..n_max`` with ``q_0 = 1``."""

    q: np.ndarray
    se: np.ndarray
    n_samples: int
    estimator: str
    cov: np.ndarray | None = None
    log_q: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        se = np.asarray(self.se, dtype=float)
        if q.ndim != 1 or q.shape != se.shape or q.size == 0:
            raise ValueError("q and se must be 1-d arrays of equal length")
        if q[0] != 1.0:
            raise ValueError("q_0 must equal 1")
        if np.any((q < 0) | (q > 1 + 1e-12)):
            raise ValueError("tail probabilities must lie in [0, 1]")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "se", se)

    @classmethod
    def from_tails(cls, q, se=None, estimator: str = "fixture") -> TailEstimate:
        q = np.asarray(q, dtype=float)
        se = np.zeros_like(q) if se is None else np.asarray(se, dtype=float)
        return cls(q, se, n_samples=0, estimator=estimator)

    @property
    def n_max(self) -> int:
        return self.q.size - 1

    def hazard(self) -> HazardSequence:
        q = self.q
        p = q[:-1] - q[1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(q[:-1] > 0, p / q[:-1], np.nan)
        return HazardSequence(h)

    def truncate(self, n_max: int) -> TailEstimate:
        k = n_max + 1
        return TailEstimate(self.q[:k], self.se[:k], self.n_samples, self.estimator,
                            None if self.cov is None else self.cov[:k, :k],
                            None if self.log_q is None else self.log_q[:k],
                            dict(self.details))

    def usable(self, floor: float = NOISE_FLOOR) -> np.ndarray:
        """Mask of entries above the noise floor ``q_n > floor * se_n``."""
        return self.q > floor * self.se

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "q", "se"])
        for n, (q, s) in enumerate(zip(self.q, self.se)):
            w.writerow([n, repr(float(q)), repr(float(s))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "n_samples": self.n_samples,
            "q": self.q.tolist(),
            "se": self.se.tolist(),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------- estimation

def _auto_trim(tails: TailEstimate) -> TailEstimate:
    # stop at the first entry that sinks under the noise floor
    ok = tails.usable()
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return tails
    return tails.truncate(max(int(bad[0]) - 1, 0))


def estimate_tails(contrib: Callable[[np.random.Generator, int], np.ndarray], n_max: int,
                   reps: int, rng, *, estimator: str, workers: int = 1,
                   log_scale: bool = True) -> TailEstimate:
    """Average per-path contributions to ``q_1..q_{n_max}``.

    ``contrib(gen, size)`` returns an array ``(size, n_max)`` holding either
    log-contributions (``log_scale=True``) or plain values.  Block ``i``
    draws from child stream ``i`` of ``rng``.
    """
    if reps < 2:
        raise ValueError("need at least 2 replications to estimate a variance")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    seq = as_seed_sequence(rng)

    def block(i, size):
        out = np.asarray(contrib(generator(seq, i), size), dtype=float)
        if out.shape != (size, n_max):
            raise ValueError(f"contribution block has shape {out.shape}, expected {(size, n_max)}")
        return Moments.from_log(out) if log_scale else Moments.from_values(out)

    mom = Moments.combine(map_blocks(block, reps, workers))
    mean, log_mean, cov = mom.estimates()
    full_cov = np.zeros((n_max + 1, n_max + 1))
    full_cov[1:, 1:] = cov
    se = np.sqrt(np.clip(np.diag(full_cov), 0.0, None))
    q = np.concatenate([[1.0], np.clip(mean, 0.0, 1.0)])
    log_q = np.concatenate([[0.0], log_mean])
    return TailEstimate(q, se, int(reps), estimator, cov=full_cov, log_q=log_q)


def estimate_tails_conditional(proc: InterarrivalProcess, T: SurvivalModel,
                               n_max: int | None = None, reps: int = 100_000, rng=0, *,
                               workers: int = 1) -> TailEstimate:
    """Conditional Monte Carlo: ``q_n = mean over paths of sf_T(S_n)``.

    With ``n_max=None`` the estimate runs to :data:`DEFAULT_N_CAP` and is cut
    at the first entry with ``q_n <= 10 se_n``.
    """
    cap = DEFAULT_N_CAP if n_max is None else int(n_max)

    def contrib(gen, size):
        S = np.cumsum(proc.sample(gen, cap, size), axis=1)
        return T.logsf(S)

    tails = estimate_tails(contrib, cap, reps, rng, estimator="conditional", workers=workers)
    return _auto_trim(tails) if n_max is None else tails


def estimate_tails_direct(proc: InterarrivalProcess, T, n_max: int | None = None,
                          reps: int = 100_000, rng=0, *, workers: int = 1) -> TailEstimate:
    """Simulate ``(path, T)`` pairs and tabulate ``1{N(T) >= n}``.

    ``T`` is a :class:`SurvivalModel` or a sampler ``T(gen, size)``.  Paths
    hold ``n_max`` arrivals, so every reported entry is exact; the share of
    paths that reached ``n_max`` before ``T`` is reported as
    ``truncated_fraction``.
    """
    cap = DEFAULT_N_CAP if n_max is None else int(n_max)
    draw_T = T.sample if isinstance(T, SurvivalModel) else T
    levels = np.arange(1, cap + 1)
    truncated = []

    def contrib(gen, size):
        S = np.cumsum(proc.sample(gen, cap, size), axis=1)
        t = np.asarray(draw_T(gen, size), dtype=float)
        counts, trunc = count_paths(S, t)
        truncated.append(int(np.count_nonzero(trunc)))
        return (counts[:, None] >= levels[None, :]).astype(float)

    tails = estimate_tails(contrib, cap, reps, rng, estimator="direct", workers=workers,
                           log_scale=False)
    tails.details["truncated_fraction"] = sum(truncated) / reps
    return _auto_trim(tails) if n_max is None else tails


# ---------------------------------------------------------------- verdicts

def check_ddfr(tails: TailEstimate, confidence: float = 0.99, *, tol: float = 1e-12,
               floor: float = NOISE_FLOOR) -> ClassVerdict:
    """Log-convexity ``q_{n+1}^2 <= q_n q_{n+2}`` with delta-method bands.

    Only entries with ``q_n > floor * se_n`` take part.  An inequality fails
    when its slack ``q_n q_{n+2} - q_{n+1}^2`` lies below ``-(z sd + tol)``,
    where ``z`` is the two-sided normal quantile at ``confidence`` split
    (Bonferroni) over the tested inequalities.  Points within the band count
    as holding, so exact equality passes.
    """
    q, se = tails.q, tails.se
    usable = tails.usable(floor)
    excluded = [int(i) for i in np.flatnonzero(~usable)]
    ns = [n for n in range(q.size - 2) if usable[n] and usable[n + 1] and usable[n + 2]]
    details = {"excluded": excluded, "confidence": confidence}
    if int(np.count_nonzero(usable)) < 3 or not ns:
        return ClassVerdict(INCONCLUSIVE, notes=("fewer than 3 usable tail entries",),
                            details=details)
    z = z_value(confidence, len(ns))
    cov = tails.cov if tails.cov is not None else np.diag(se**2)
    rows, failing = [], []
    margin = math.inf
    for n in ns:
        lhs = float(q[n + 1] ** 2)
        rhs = float(q[n] * q[n + 2])
        idx = [n, n + 1, n + 2]
        g = np.array([q[n + 2], -2.0 * q[n + 1], q[n]])
        sd = math.sqrt(max(float(g @ cov[np.ix_(idx, idx)] @ g), 0.0))
        slack = rhs - lhs
        margin = min(margin, slack)
        bad = slack < -(z * sd + tol)
        rows.append({"n": n, "lhs": lhs, "rhs": rhs, "slack": slack, "sd": sd,
                     "status": FAILS if bad else HOLDS})
        if bad:
            failing.append(n)
    details.update(z=z, inequalities=rows, failing=failing)
    if failing:
        r = rows[ns.index(failing[0])]
        witness = {"n": r["n"], "lhs": r["lhs"], "rhs": r["rhs"], "sd": r["sd"]}
        return ClassVerdict(FAILS, witness=witness, margin=margin, details=details)
    return ClassVerdict(HOLDS, margin=margin, details=details)


def check_monotone(tails: TailEstimate, k: float = 3.0) -> ClassVerdict:
    """Flag ``q_{n+1} > q_n`` beyond ``k`` combined standard errors."""
    q, se = tails.q, tails.se
    jump = q[1:] - q[:-1]
    band = k * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    bad = np.flatnonzero(jump > band)
    margin = float(np.min(band - jump)) if jump.size else math.inf
    if bad.size:
        n = int(bad[0])
        return ClassVerdict(FAILS, witness={"n": n, "lhs": float(q[n + 1]), "rhs": float(q[n])},
                            margin=margin)
    return ClassVerdict(HOLDS, margin=margin)


def _x1_zero_atom(proc: InterarrivalProcess, rng) -> float:
    if proc.marginal is not None:
        m = proc.marginal(1)
        if m is not None:
            return float(m.zero_atom)
    x = proc.sample(generator(as_seed_sequence(rng), 2**31 - 1), 1, 10_000)
    return float(np.count_nonzero(x[:, 0] == 0.0) / x.shape[0])


def check_lemma1(proc: InterarrivalProcess, T: SurvivalModel, reps: int = 100_000, rng=0, *,
                 n_max: int | None = None, confidence: float = 0.99,
                 workers: int = 1) -> ClassVerdict:
    """Inequality chain ``E^2[sf_T(S_{n+1})] <= E[sf_T(S_n)] E[sf_T(S_{n+2})]``.

    The ``n = 0`` member reads ``E^2[sf_T(X_1)] <= E[sf_T(S_2)]`` because
    ``P(N(T) >= 0) = 1``.  Also checks that ``T`` and ``X_1`` carry no joint
    atom at the origin.
    """
    from .distmodel import check_class

    t_zero = float(T.zero_atom)
    x_zero = _x1_zero_atom(proc, rng)
    joint = t_zero * x_zero
    cond_a = check_class(T, "DFR")
    details = {"condition_a_T_dfr": cond_a.status,
               "condition_b": {"T_zero_atom": t_zero, "X1_zero_atom": x_zero,
                               "joint_zero_atom": joint}}
    if joint > 0:
        witness = {"joint_zero_atom": joint, "lhs": joint, "rhs": 0.0}
        return ClassVerdict(FAILS, witness=witness, margin=-joint,
                            notes=(f"condition b) fails: joint zero atom {joint:.6g}",),
                            details=details)
    tails = estimate_tails_conditional(proc, T, n_max=n_max, reps=reps, rng=rng,
                                       workers=workers)
    chain = check_ddfr(tails, confidence)
    details.update(expectations=tails.q[1:].tolist(), se=tails.se[1:].tolist(),
                   chain=chain.details)
    notes = ()
    if cond_a.status != HOLDS:
        notes = (f"T is not verified DFR ({cond_a.status}); the chain is checked regardless",)
    return ClassVerdict(chain.status, witness=chain.witness, margin=chain.margin,
                        notes=notes + chain.notes, details=details)
