"""Stochastic order, association and the hypotheses of the d-DFR theorem.

Association cannot be certified from samples.  :func:`estimate_association`
searches a finite family of increasing test functions for a significantly
negative covariance; a ``holds`` verdict means "no counterexample in the
family".  Samplers built from independent components, or monotone images of
them, carry a provenance tag that certifies association structurally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distmodel import SurvivalModel, check_class, default_grid
from .procgen import INDEPENDENT, MONOTONE_IMAGE, InterarrivalProcess, JointSampler
from .stopcount import check_lemma1
from .streams import as_seed_sequence, child, generator, map_blocks, z_value
from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict, worst

__all__ = [
    "MonotoneFunctionFamily",
    "AssociationReport",
    "Theorem1Report",
    "check_stochastic_order",
    "order_relation",
    "estimate_association",
    "check_prop1",
    "check_theorem1",
]

CERTIFIED = {
    INDEPENDENT: "independent components are associated",
    MONOTONE_IMAGE: "increasing images of independent components are associated",
}


# ---------------------------------------------------------------- stochastic order

def _survival_and_se(X, t, paired_with=None):
    if isinstance(X, SurvivalModel):
        return X.sf(t), np.zeros_like(t), None
    x = np.asarray(X, dtype=float)
    ind = x[:, None] > t[None, :]
    p = ind.mean(axis=0)
    return p, np.sqrt(p * (1 - p) / x.size), ind


def _default_order_grid(X, Y):
    parts = []
    for Z in (X, Y):
        if isinstance(Z, SurvivalModel):
            parts.append(default_grid(Z))
        else:
            parts.append(np.quantile(np.asarray(Z, dtype=float), np.linspace(0.01, 0.99, 99)))
    return np.unique(np.concatenate(parts))


def check_stochastic_order(X, Y, grid=None, tol: float = 1e-9, *, confidence: float = 0.99,
                           paired: bool = False) -> ClassVerdict:
    """``X <=_ST Y``: ``sf_X(t) <= sf_Y(t) + tol`` on every grid point.

    ``X`` and ``Y`` are survival models or 1-d sample arrays.  Sample inputs
    are compared with a simultaneous (Bonferroni) normal band; with
    ``paired=True`` the arrays are rows of one joint draw and the band uses
    the per-row differences.
    """
    t = _default_order_grid(X, Y) if grid is None else np.asarray(grid, dtype=float)
    if t.size == 0:
        raise ValueError("grid must be nonempty")
    t = np.unique(t)
    fx, sx, ix = _survival_and_se(X, t)
    fy, sy, iy = _survival_and_se(Y, t)
    if paired and ix is not None and iy is not None:
        if ix.shape != iy.shape:
            raise ValueError("paired samples must have equal length")
        d = ix.astype(float) - iy.astype(float)
        se = d.std(axis=0, ddof=1) / math.sqrt(d.shape[0])
    else:
        se = np.sqrt(sx**2 + sy**2)
    sampled = ix is not None or iy is not None
    z = z_value(confidence, t.size) if sampled else 0.0
    gap = fy + tol + z * se - fx
    margin = float(np.min(fy - fx))
    k = int(np.argmin(gap))
    details = {"grid_points": int(t.size), "sampled": sampled}
    if gap[k] < 0:
        witness = {"t": float(t[k]), "lhs": float(fx[k]), "rhs": float(fy[k])}
        return ClassVerdict(FAILS, witness=witness, margin=margin, details=details)
    return ClassVerdict(HOLDS, margin=margin, details=details)


def order_relation(X, Y, grid=None, tol: float = 1e-9, **kw) -> tuple[str, dict]:
    """Classify the pair as ``"X<=Y"``, ``"Y<=X"``, ``"equal"`` or ``"not comparable"``."""
    if grid is None:
        grid = _default_order_grid(X, Y)
    xy = check_stochastic_order(X, Y, grid, tol, **kw)
    yx = check_stochastic_order(Y, X, grid, tol, **kw)
    if xy.holds and yx.holds:
        rel = "equal"
    elif xy.holds:
        rel = "X<=Y"
    elif yx.holds:
        rel = "Y<=X"
    else:
        rel = "not comparable"
    return rel, {"X<=Y": xy, "Y<=X": yx}


# ---------------------------------------------------------------- association

@dataclass(frozen=True)
class MonotoneFunctionFamily:
    """Finite list of componentwise nondecreasing test functions.

    Each generator maps an ``(N, d)`` array to ``(N,)``.  Decreasing test
    functions need no separate family: negating both ``f`` and ``g`` leaves
    the covariance unchanged.
    """

    names: tuple[str, ...]
    generators: tuple[Callable[[np.ndarray], np.ndarray], ...]

    def __len__(self):
        return len(self.generators)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.column_stack([g(x) for g in self.generators]).astype(float)

    @classmethod
    def projections(cls, dim: int) -> MonotoneFunctionFamily:
        return cls(tuple(f"x{i}" for i in range(dim)),
                   tuple((lambda x, i=i: x[:, i]) for i in range(dim)))

    @classmethod
    def default(cls, pilot: np.ndarray, levels=np.linspace(0.1, 0.9, 9),
                clip_q: float = 0.99) -> MonotoneFunctionFamily:
        """Indicators at marginal quantiles, clipped projections, their min and max."""
        pilot = np.asarray(pilot, dtype=float)
        d = pilot.shape[1]
        names, gens = [], []
        for i in range(d):
            for c in np.unique(np.quantile(pilot[:, i], levels)):
                names.append(f"1{{x{i}>{c:.4g}}}")
                gens.append(lambda x, i=i, c=c: x[:, i] > c)
        caps = np.quantile(pilot, clip_q, axis=0)
        clipped = [lambda x, i=i, m=caps[i]: np.clip(x[:, i], 0.0, m) for i in range(d)]
        for i in range(d):
            names.append(f"min(x{i},{caps[i]:.4g})")
            gens.append(clipped[i])
        for i in range(d):
            for j in range(i + 1, d):
                names.append(f"min(x{i},x{j})")
                gens.append(lambda x, a=clipped[i], b=clipped[j]: np.minimum(a(x), b(x)))
                names.append(f"max(x{i},x{j})")
                gens.append(lambda x, a=clipped[i], b=clipped[j]: np.maximum(a(x), b(x)))
        return cls(tuple(names), tuple(gens))


@dataclass(frozen=True)
class AssociationReport:
    min_cov: float
    se_at_min: float
    pair_id: tuple[str, str] | None
    verdict: ClassVerdict
    table: list = field(default_factory=list)
    certified: str | None = None

    def to_dict(self) -> dict:
        return {"min_cov": self.min_cov, "se_at_min": self.se_at_min,
                "pair_id": list(self.pair_id) if self.pair_id else None,
                "verdict": self.verdict.to_dict(), "certified": self.certified,
                "covariances": self.table}


_PILOT_KEY = 2**31 - 2


def estimate_association(pair_sampler: JointSampler, family: MonotoneFunctionFamily | None = None,
                         reps: int = 10_000, rng=0, *, confidence: float = 0.99,
                         tol: float = 1e-12, workers: int = 1) -> AssociationReport:
    """Search ``family`` for a significantly negative ``Cov(f(X), g(X))``.

    Verdict ``fails`` only when some pair has ``cov < -(z se + tol)`` with a
    Bonferroni-adjusted ``z``; otherwise ``holds`` labelled "no
    counterexample in family F".  Constant output is ``inconclusive``.
    """
    seq = as_seed_sequence(rng)
    if family is None:
        pilot = pair_sampler(generator(seq, _PILOT_KEY), 2000)
        family = MonotoneFunctionFamily.default(pilot)
    blocks = map_blocks(lambda i, n: family.evaluate(pair_sampler(generator(seq, i), n)),
                        reps, workers)
    F = np.concatenate(blocks, axis=0)
    n = F.shape[0]
    C = F - F.mean(axis=0)
    live = np.flatnonzero(C.std(axis=0) > 0)
    certified = CERTIFIED.get(pair_sampler.provenance)
    if live.size < 2:
        v = ClassVerdict(INCONCLUSIVE, notes=("sampler output is degenerate for this family",))
        return AssociationReport(math.nan, math.nan, None, v, certified=certified)
    ii, jj = np.triu_indices(live.size, k=1)
    a, b = live[ii], live[jj]
    prod = C[:, a] * C[:, b]
    cov = prod.sum(axis=0) / (n - 1)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n)
    z = z_value(confidence, cov.size)
    score = cov + z * se + tol
    k = int(np.argmin(cov))
    kk = int(np.argmin(score))
    table = [{"f": family.names[x], "g": family.names[y], "cov": float(c), "se": float(s)}
             for x, y, c, s in zip(a, b, cov, se)]
    notes = ("no counterexample in family F" if score[kk] >= 0
             else "negative covariance found in family F",)
    if certified:
        notes = notes + (f"structural: {certified}",)
    if score[kk] < 0:
        pair = (family.names[a[kk]], family.names[b[kk]])
        v = ClassVerdict(FAILS, witness={"pair": list(pair), "lhs": 0.0, "rhs": float(cov[kk]),
                                         "se": float(se[kk])},
                         margin=float(cov[k]), notes=notes, details={"z": z})
    else:
        v = ClassVerdict(HOLDS, margin=float(cov[k]), notes=notes, details={"z": z})
    return AssociationReport(float(cov[k]), float(se[k]), (family.names[a[k]], family.names[b[k]]),
                             v, table, certified)


# ---------------------------------------------------------------- two-point inequality

def check_prop1(pair_sampler: JointSampler, T: SurvivalModel, reps: int = 100_000, rng=0, *,
                confidence: float = 0.99, tol: float = 1e-12, workers: int = 1,
                diagnostics: bool = True) -> ClassVerdict:
    """``E^2[sf_T(X_1)] <= E[sf_T(X_1 + X_2)] * sf_T(0)`` by Monte Carlo.

    Diagnostics (``X_2 <=_ST X_1`` on the joint sample, association of the
    pair, DFR of ``T``) are attached to ``details``.
    """
    seq = as_seed_sequence(rng)
    f0 = float(T.survival_at(0.0))

    def block(i, n):
        x = pair_sampler(generator(seq, i), n)
        a = T.sf(x[:, 0])
        b = T.sf(x[:, 0] + x[:, 1])
        return np.column_stack([a, b]), x

    parts = map_blocks(block, reps, workers)
    V = np.concatenate([p[0] for p in parts], axis=0)
    mean = V.mean(axis=0)
    cov = np.cov(V, rowvar=False) / V.shape[0]
    left = float(mean[0] ** 2)
    right = float(mean[1] * f0)
    g = np.array([-2.0 * mean[0], f0])
    sd = math.sqrt(max(float(g @ cov @ g), 0.0))
    z = z_value(confidence)
    slack = right - left
    details = {"left": left, "right": right, "sd": sd, "sf_T_0": f0,
               "E_sf_T_X1": float(mean[0]), "E_sf_T_S2": float(mean[1])}
    if diagnostics:
        X = np.concatenate([p[1] for p in parts[:3]], axis=0)
        order = check_stochastic_order(X[:, 1], X[:, 0], confidence=confidence, paired=True)
        assoc = estimate_association(pair_sampler, reps=min(reps, 10_000), rng=child(seq, 2**31 - 3),
                                     confidence=confidence, workers=workers)
        details.update(order_X2_le_X1=order, association=assoc.to_dict(),
                       T_dfr=check_class(T, "DFR"))
    if slack < -(z * sd + tol):
        return ClassVerdict(FAILS, witness={"lhs": left, "rhs": right, "sd": sd},
                            margin=slack, details=details)
    return ClassVerdict(HOLDS, margin=slack, details=details)


# ---------------------------------------------------------------- hypothesis battery

@dataclass(frozen=True)
class Theorem1Report:
    """Hypothesis checks a)-d) plus the inequality chain and the conclusion."""

    a_T_dfr: ClassVerdict
    b_zero_atoms: ClassVerdict
    c_order: ClassVerdict
    c_association: AssociationReport
    d_conditional: ClassVerdict
    prop1: ClassVerdict
    lemma1: ClassVerdict

    @property
    def hypotheses(self) -> str:
        return worst([self.a_T_dfr.status, self.b_zero_atoms.status, self.c_order.status,
                      self.c_association.verdict.status, self.d_conditional.status])

    @property
    def ddfr(self) -> str:
        return self.lemma1.status

    def verdicts(self) -> dict[str, ClassVerdict]:
        return {"a_T_dfr": self.a_T_dfr, "b_zero_atoms": self.b_zero_atoms,
                "c_order": self.c_order, "c_association": self.c_association.verdict,
                "d_conditional": self.d_conditional, "prop1": self.prop1,
                "lemma1": self.lemma1}

    def to_dict(self) -> dict:
        out = {k: v.to_dict() for k, v in self.verdicts().items()}
        out["c_association"] = self.c_association.to_dict()
        out["hypotheses"] = self.hypotheses
        return out


def _pair_order(proc: InterarrivalProcess, sample: np.ndarray, confidence: float) -> ClassVerdict:
    if proc.marginal is not None:
        m1, m2 = proc.marginal(1), proc.marginal(2)
        if m1 is not None and m2 is not None:
            return check_stochastic_order(m2, m1)
    return check_stochastic_order(sample[:, 1], sample[:, 0], confidence=confidence, paired=True)


def check_theorem1(proc: InterarrivalProcess, T: SurvivalModel, reps: int = 50_000, rng=0, *,
                   confidence: float = 0.99, assoc_reps: int = 10_000,
                   conditional_n=(1, 2, 3), prefixes: int = 2, workers: int = 1) -> Theorem1Report:
    """Run every hypothesis check and the conclusion for ``(proc, T)``.

    Condition d) is tested on sampled prefixes for variants with an explicit
    conditional law; for a custom joint sampler it is reported inconclusive.
    """
    seq = as_seed_sequence(rng)
    a = check_class(T, "DFR")
    x_zero = proc.marginal(1).zero_atom if proc.marginal is not None else None
    pair = proc.pair()
    sample = pair(generator(seq, 1), assoc_reps)
    if x_zero is None:
        x_zero = float(np.mean(sample[:, 0] == 0))
    joint = float(T.zero_atom) * float(x_zero)
    if joint > 0:
        b = ClassVerdict(FAILS, witness={"joint_zero_atom": joint, "lhs": joint, "rhs": 0.0},
                         margin=-joint)
    else:
        b = ClassVerdict(HOLDS, margin=0.0, details={"T_zero_atom": float(T.zero_atom),
                                                     "X1_zero_atom": float(x_zero)})
    c_order = _pair_order(proc, sample, confidence)
    c_assoc = estimate_association(pair, reps=assoc_reps, rng=child(seq, 2),
                                   confidence=confidence, workers=workers)

    # condition d) on a few sampled prefixes
    d_parts, d_rows = [], []
    g = generator(seq, 3)
    for n in conditional_n:
        for k in range(prefixes):
            prefix = proc.sample(g, n)
            cp = proc.conditional_pair(prefix)
            if cp is None:
                d_rows.append({"n": n, "prefix": prefix.tolist(), "status": INCONCLUSIVE})
                d_parts.append(INCONCLUSIVE)
                continue
            key = (4, n, k)
            zs = cp(generator(seq, *key), assoc_reps)
            o = check_stochastic_order(zs[:, 1], zs[:, 0], confidence=confidence, paired=True)
            s = estimate_association(cp, reps=assoc_reps, rng=child(seq, 5, n, k),
                                     confidence=confidence, workers=workers)
            st = worst([o.status, s.verdict.status])
            d_rows.append({"n": n, "prefix": prefix.tolist(), "order": o.status,
                           "association": s.verdict.status, "certified": s.certified,
                           "status": st})
            d_parts.append(st)
    d_status = worst(d_parts) if d_parts else INCONCLUSIVE
    if d_status == FAILS:
        bad = next(r for r in d_rows if r["status"] == FAILS)
        d = ClassVerdict(FAILS, witness={"n": bad["n"], "prefix": bad["prefix"],
                                         "lhs": bad.get("order"), "rhs": bad.get("association")},
                         details={"rows": d_rows})
    else:
        notes = () if proc.variant != "custom" else (
            "conditional versions are not observable from a black-box sampler",)
        d = ClassVerdict(d_status, notes=notes, details={"rows": d_rows})

    p1 = check_prop1(pair, T, reps=reps, rng=child(seq, 6), confidence=confidence,
                     workers=workers, diagnostics=False)
    l1 = check_lemma1(proc, T, reps=reps, rng=child(seq, 7), confidence=confidence,
                      workers=workers)
    return Theorem1Report(a, b, c_order, c_assoc, d, p1, l1)
