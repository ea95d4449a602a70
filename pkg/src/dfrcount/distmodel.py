"""Nonnegative lifetime distributions and reliability-class checks.

A :class:`SurvivalModel` exposes ``sf(t) = P(X > t)``, sampling from a
caller-supplied :class:`numpy.random.Generator`, the mass at the origin and,
when known, the mean.  Models are immutable once built.

Class checks (DFR, NWU, NWUE, IMRL) are grid based: a ``holds`` verdict means
the defining inequality was satisfied at every evaluated grid point, nothing
more.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, logsumexp

from .streams import z_value
from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict

__all__ = [
    "ModelError",
    "OutsideSupportError",
    "SurvivalModel",
    "Exponential",
    "Weibull",
    "Uniform",
    "Deterministic",
    "ExponentialMixture",
    "Empirical",
    "ZeroInflated",
    "Residual",
    "Equilibrium",
    "residual_survival",
    "mean_residual_life",
    "equilibrium_transform",
    "make_mixture_exponentials",
    "default_grid",
    "check_class",
    "CLASSES",
]

CLASSES = ("DFR", "NWU", "NWUE", "IMRL")

# integration truncation for mean residual life
MRL_RATIO_FLOOR = 1e-12
#: relative slack for comparing quadrature MRL values
MRL_REL_TOL = 1e-8
MRL_HORIZON = 1e6


class ModelError(ValueError):
    """Invalid distribution parameters or an operation outside the support."""


class OutsideSupportError(ModelError):
    pass


def _arr(t):
    return np.asarray(t, dtype=float)


class SurvivalModel:
    """Base class; subclasses implement :meth:`sf` and :meth:`sample`."""

    family: str = "custom"
    zero_atom: float = 0.0
    #: analytic class membership, e.g. ``{"DFR": True}``; missing means unknown
    analytic: dict = {}

    @property
    def mean(self) -> float | None:
        return None

    @property
    def second_moment(self) -> float | None:
        return None

    def sf(self, t):
        raise NotImplementedError

    def logsf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(t))

    def survival_at(self, t: float) -> float:
        return float(self.sf(float(t)))

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def isf(self, p):
        """Smallest ``t`` with ``sf(t) <= p`` (vectorised bisection)."""
        p = _arr(p)
        lo = np.zeros_like(p)
        hi = np.ones_like(p)
        for _ in range(200):
            grow = self.sf(hi) > p
            if not grow.any():
                break
            hi = np.where(grow, hi * 2.0, hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            above = self.sf(mid) > p
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return hi if hi.ndim else float(hi)

    def sf_se(self, t):
        """Standard error of ``sf``; zero for closed-form models."""
        return np.zeros_like(_arr(t))

    def describe(self) -> dict:
        return {"family": self.family}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "family")
        return f"{type(self).__name__}({args})"


class Exponential(SurvivalModel):
    family = "exponential"
    analytic = {c: True for c in CLASSES}

    def __init__(self, rate: float = 1.0):
        if not rate > 0 or not math.isfinite(rate):
            raise ModelError(f"exponential rate must be positive, got {rate}")
        self.rate = float(rate)

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2

    def sf(self, t):
        t = _arr(t)
        return np.where(t < 0, 1.0, np.exp(-self.rate * np.maximum(t, 0.0)))

    def logsf(self, t):
        return -self.rate * np.maximum(_arr(t), 0.0)

    def isf(self, p):
        out = -np.log(_arr(p)) / self.rate
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def describe(self):
        return {"family": self.family, "rate": self.rate}


class Weibull(SurvivalModel):
    family = "weibull"

    def __init__(self, shape: float, scale: float = 1.0):
        if not shape > 0 or not scale > 0:
            raise ModelError(f"weibull shape and scale must be positive, got {shape}, {scale}")
        self.shape = float(shape)
        self.scale = float(scale)
        dfr = self.shape <= 1.0
        self.analytic = {c: dfr for c in CLASSES}

    @property
    def mean(self):
        return self.scale * gamma_fn(1.0 + 1.0 / self.shape)

    @property
    def second_moment(self):
        return self.scale**2 * gamma_fn(1.0 + 2.0 / self.shape)

    def logsf(self, t):
        return -((np.maximum(_arr(t), 0.0) / self.scale) ** self.shape)

    def sf(self, t):
        return np.exp(self.logsf(t))

    def isf(self, p):
        out = self.scale * (-np.log(_arr(p))) ** (1.0 / self.shape)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return self.scale * rng.weibull(self.shape, size)

    def describe(self):
        return {"family": self.family, "shape": self.shape, "scale": self.scale}


class Uniform(SurvivalModel):
    family = "uniform"
    analytic = {c: False for c in CLASSES}

    def __init__(self, low: float = 0.0, high: float = 1.0):
        if not 0 <= low < high:
            raise ModelError(f"uniform needs 0 <= low < high, got {low}, {high}")
        self.low = float(low)
        self.high = float(high)

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    @property
    def second_moment(self):
        a, b = self.low, self.high
        return (a * a + a * b + b * b) / 3.0

    def sf(self, t):
        t = _arr(t)
        return np.clip((self.high - t) / (self.high - self.low), 0.0, 1.0)

    def isf(self, p):
        out = self.high - _arr(p) * (self.high - self.low)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.uniform(self.low, self.high, size)

    def describe(self):
        return {"family": self.family, "low": self.low, "high": self.high}


class Deterministic(SurvivalModel):
    family = "deterministic"
    analytic = {c: False for c in CLASSES}

    def __init__(self, value: float):
        if not value >= 0:
            raise ModelError(f"deterministic value must be nonnegative, got {value}")
        self.value = float(value)
        self.zero_atom = 1.0 if self.value == 0 else 0.0

    @property
    def mean(self):
        return self.value

    @property
    def second_moment(self):
        return self.value**2

    def sf(self, t):
        return np.where(_arr(t) < self.value, 1.0, 0.0)

    def isf(self, p):
        out = np.where(_arr(p) < 1.0, self.value, 0.0)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def describe(self):
        return {"family": self.family, "value": self.value}


class ExponentialMixture(SurvivalModel):
    family = "exponential-mixture"
    analytic = {c: True for c in CLASSES}

    def __init__(self, weights, rates):
        w = np.atleast_1d(_arr(weights))
        r = np.atleast_1d(_arr(rates))
        if w.shape != r.shape or w.size == 0:
            raise ModelError("weights and rates must be nonempty and of equal length")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-12, rtol=0):
            raise ModelError(f"mixture weights must be nonnegative and sum to 1, got {w.tolist()}")
        if np.any(~(r > 0)) or not np.all(np.isfinite(r)):
            raise ModelError(f"mixture rates must be positive, got {r.tolist()}")
        self.weights = w / w.sum()
        self.rates = r
        self.weights.setflags(write=False)
        self.rates.setflags(write=False)

    @property
    def mean(self):
        return float(np.sum(self.weights / self.rates))

    @property
    def second_moment(self):
        return float(np.sum(2.0 * self.weights / self.rates**2))

    def logsf(self, t):
        t = np.maximum(_arr(t), 0.0)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        out = logsumexp(logw - np.multiply.outer(t, self.rates), axis=-1)
        # weights may sum to 1 - ulp; pin the origin
        return np.where(t == 0.0, 0.0, np.minimum(out, 0.0))

    def sf(self, t):
        return np.exp(self.logsf(t))

    def sample(self, rng, size=None):
        comp = rng.choice(self.rates.size, size=size, p=self.weights)
        return rng.exponential(1.0, size) / self.rates[comp]

    def describe(self):
        return {"family": self.family, "weights": self.weights.tolist(),
                "rates": self.rates.tolist()}


class Empirical(SurvivalModel):
    """Step survival of a sample; no censoring, so Kaplan-Meier is the ECDF."""

    analytic = {}

    def __init__(self, samples, family: str = "empirical"):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise ModelError("empirical model needs at least one sample")
        if np.any(x < 0) or not np.all(np.isfinite(x)):
            raise ModelError("empirical samples must be finite and nonnegative")
        x.setflags(write=False)
        self.samples = x
        self.family = family
        self.zero_atom = float(np.count_nonzero(x == 0) / x.size)

    @classmethod
    def from_file(cls, path, family: str = "empirical"):
        return cls(np.loadtxt(path, dtype=float, ndmin=1), family=family)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self):
        return float(self.samples.mean())

    @property
    def second_moment(self):
        return float(np.mean(self.samples**2))

    def sf(self, t):
        t = _arr(t)
        idx = np.searchsorted(self.samples, t, side="right")
        return (self.n - idx) / self.n

    def sf_se(self, t):
        return _binomial_se(self.sf(t), self.n)

    def isf(self, p):
        p = _arr(p)
        k = np.clip(np.ceil((1.0 - p) * self.n).astype(int) - 1, 0, self.n - 1)
        out = self.samples[k]
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.choice(self.samples, size=size)

    def describe(self):
        return {"family": self.family, "n": self.n, "mean": self.mean,
                "zero_atom": self.zero_atom}


class ZeroInflated(SurvivalModel):
    """Mass ``p0`` at the origin, otherwise ``base``."""

    family = "zero-inflated"

    def __init__(self, base: SurvivalModel, p0: float):
        if not 0 <= p0 < 1:
            raise ModelError(f"zero atom must lie in [0, 1), got {p0}")
        self.base = base
        self.p0 = float(p0)
        self.zero_atom = self.p0 + (1 - self.p0) * base.zero_atom
        # a DFR base stays DFR: the ratio sf(z+t)/sf(t) for t > 0 is unchanged
        # and at t = 0 the atom only lowers the denominator's complement
        self.analytic = {c: True for c in CLASSES if base.analytic.get("DFR")}

    @property
    def mean(self):
        m = self.base.mean
        return None if m is None else (1 - self.p0) * m

    @property
    def second_moment(self):
        m = self.base.second_moment
        return None if m is None else (1 - self.p0) * m

    def sf(self, t):
        t = _arr(t)
        return np.where(t < 0, 1.0, (1 - self.p0) * self.base.sf(t))

    def logsf(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, math.log1p(-self.p0) + self.base.logsf(t))

    def sample(self, rng, size=None):
        x = self.base.sample(rng, size)
        zero = rng.random(size) < self.p0
        return np.where(zero, 0.0, x)

    def describe(self):
        return {"family": self.family, "p0": self.p0, "base": self.base.describe()}


class Residual(SurvivalModel):
    """Residual life ``X - s`` given ``X > s``."""

    family = "residual"

    def __init__(self, base: SurvivalModel, s: float):
        self.base = base
        self.s = float(s)
        self._log_norm = float(base.logsf(self.s))
        if not np.isfinite(self._log_norm):
            raise OutsideSupportError(f"survival at s={s} is zero; s lies outside the support")
        self.analytic = {c: True for c in CLASSES if base.analytic.get("DFR")}

    def logsf(self, t):
        t = _arr(t)
        return np.where(t < 0, 0.0, self.base.logsf(self.s + np.maximum(t, 0.0)) - self._log_norm)

    def sf(self, t):
        return np.exp(self.logsf(t))

    @property
    def mean(self):
        return mean_residual_life(self.base, self.s)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.isf(u)

    def describe(self):
        return {"family": self.family, "s": self.s, "base": self.base.describe()}


class Equilibrium(SurvivalModel):
    """Stationary-excess law ``P(X > t) = (1/mu) * int_t^inf sf(u) du``.

    Evaluated numerically from the base survival; the integrated tail is
    tabulated on a geometric grid and refined with Gauss-Legendre inside
    each cell.
    """

    family = "equilibrium"
    analytic = {}
    _NODES, _WEIGHTS = np.polynomial.legendre.leggauss(24)

    def __init__(self, base: SurvivalModel):
        mu = base.mean
        if mu is None or not (0 < mu < math.inf):
            raise ModelError("equilibrium transform needs a finite positive mean")
        self.base = base
        self._mu = float(mu)
        # tabulate I(t) = int_t^inf sf on [0, horizon]
        hi = float(base.isf(1e-14)) if base.sf(0.0) > 1e-14 else mu
        hi = max(hi, 10 * mu)
        knots = np.concatenate([[0.0], np.geomspace(mu * 1e-6, hi, 2000)])
        cells = np.array([self._gl(a, b) for a, b in zip(knots[:-1], knots[1:])])
        tail = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
        # renormalise so that sf(0) = 1 exactly
        self._knots = knots
        self._tail = tail / tail[0]
        self._total = tail[0]

    def _gl(self, a, b):
        x = 0.5 * (b - a) * self._NODES + 0.5 * (b + a)
        return 0.5 * (b - a) * float(np.dot(self._WEIGHTS, self.base.sf(x)))

    @property
    def mean(self):
        m2 = self.base.second_moment
        return None if m2 is None else m2 / (2.0 * self._mu)

    def sf(self, t):
        t = _arr(t)
        tc = np.clip(t, 0.0, self._knots[-1])
        k = np.clip(np.searchsorted(self._knots, tc, side="right") - 1, 0, self._knots.size - 2)
        a = self._knots[k]
        # int_a^t sf via Gauss-Legendre on each point's partial cell
        half = 0.5 * (tc - a)
        x = half[..., None] * self._NODES + (half + a)[..., None]
        part = half * np.sum(self._WEIGHTS * self.base.sf(x), axis=-1)
        out = self._tail[k] - part / self._total
        out = np.where(t < 0, 1.0, np.where(t >= self._knots[-1], 0.0, out))
        return np.clip(out, 0.0, 1.0)

    def sample(self, rng, size=None):
        return self.isf(rng.random(size))

    def describe(self):
        return {"family": self.family, "base": self.base.describe()}


class _WeibullEquilibrium(SurvivalModel):
    # X = scale * G**(1/shape) with G ~ Gamma(1/shape)
    family = "equilibrium"

    def __init__(self, base: Weibull):
        self.base = base
        self.analytic = {c: True for c in CLASSES if base.shape <= 1}

    @property
    def mean(self):
        return self.base.second_moment / (2.0 * self.base.mean)

    def sf(self, t):
        b = self.base
        return gammaincc(1.0 / b.shape, (np.maximum(_arr(t), 0.0) / b.scale) ** b.shape)

    def sample(self, rng, size=None):
        b = self.base
        return b.scale * rng.gamma(1.0 / b.shape, 1.0, size) ** (1.0 / b.shape)

    def describe(self):
        return {"family": self.family, "base": self.base.describe()}


class _EmpiricalEquilibrium(SurvivalModel):
    # size-biased pick times an independent uniform
    family = "equilibrium"
    analytic = {}

    def __init__(self, base: Empirical):
        self.base = base
        x = base.samples
        self._x = x
        self._csum = np.concatenate([[0.0], np.cumsum(x)])
        self._p = x / x.sum()

    @property
    def mean(self):
        return self.base.second_moment / (2.0 * self.base.mean)

    def sf(self, t):
        t = np.maximum(_arr(t), 0.0)
        idx = np.searchsorted(self._x, t, side="right")
        above = self._csum[-1] - self._csum[idx]
        count = self._x.size - idx
        return (above - count * t) / self._csum[-1]

    def sample(self, rng, size=None):
        pick = rng.choice(self._x, size=size, p=self._p)
        return pick * rng.random(size)

    def describe(self):
        return {"family": self.family, "base": self.base.describe()}


def residual_survival(model: SurvivalModel, s: float) -> SurvivalModel:
    """Residual life model at age ``s``."""
    if s < 0:
        raise ModelError("age s must be nonnegative")
    if model.survival_at(s) <= 0:
        raise OutsideSupportError(f"survival at s={s} is zero; s lies outside the support")
    if s == 0 and model.zero_atom == 0:
        return model
    if isinstance(model, Exponential):
        return model
    if isinstance(model, ExponentialMixture):
        w = model.weights * np.exp(-model.rates * s)
        return ExponentialMixture(w / w.sum(), model.rates)
    if isinstance(model, Empirical):
        return Empirical(model.samples[model.samples > s] - s, family=model.family)
    return Residual(model, s)


def mean_residual_life(model: SurvivalModel, t: float, *, ratio_floor: float = MRL_RATIO_FLOOR,
                       horizon: float = MRL_HORIZON) -> float | None:
    """``m(t) = int_0^inf sf(t+z)/sf(t) dz`` by adaptive quadrature.

    Integration proceeds over doubling cells and stops once the survival
    ratio falls below ``ratio_floor``.  Returns ``None`` (inconclusive) when
    the ratio is still above the floor at ``horizon`` time units.
    """
    base = model.survival_at(t)
    if base <= 0:
        raise OutsideSupportError(f"survival at t={t} is zero")
    if isinstance(model, Empirical):
        rest = model.samples[model.samples > t]
        return float(np.mean(rest - t))

    def ratio(z):
        return model.survival_at(t + z) / base

    scale = model.mean if model.mean else 1.0
    width = max(min(scale, 1.0), 1e-9)
    a, total = 0.0, 0.0
    while True:
        b = a + width
        val, _ = integrate.quad(ratio, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
        total += val
        if ratio(b) < ratio_floor:
            return total
        if b >= horizon:
            return None
        a, width = b, width * 2.0


def equilibrium_transform(model: SurvivalModel) -> SurvivalModel:
    """Equilibrium (stationary-excess) distribution of ``model``."""
    mu = model.mean
    if mu is None or not (0 < mu < math.inf):
        raise ModelError("equilibrium transform needs a finite positive mean")
    if isinstance(model, Exponential):
        return model
    if isinstance(model, ExponentialMixture):
        w = model.weights / model.rates
        return ExponentialMixture(w / w.sum(), model.rates)
    if isinstance(model, Deterministic):
        return Uniform(0.0, model.value)
    if isinstance(model, Weibull):
        return _WeibullEquilibrium(model)
    if isinstance(model, Empirical):
        return _EmpiricalEquilibrium(model)
    return Equilibrium(model)


def make_mixture_exponentials(weights, rates) -> SurvivalModel:
    """Finite mixture of exponentials; always DFR."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    r = np.atleast_1d(np.asarray(rates, dtype=float))
    if w.size == 1 and r.size == 1:
        if not np.isclose(w[0], 1.0):
            raise ModelError("mixture weights must sum to 1")
        return Exponential(float(r[0]))
    return ExponentialMixture(w, r)


# ---------------------------------------------------------------- class checks

def default_grid(model: SurvivalModel, points: int = 64, lo_q: float = 0.001,
                 hi_q: float = 0.999, extra=()) -> np.ndarray:
    """Log-spaced grid between the ``lo_q`` and ``hi_q`` quantiles, plus 0."""
    t_lo = float(model.isf(1.0 - lo_q))
    t_hi = float(model.isf(1.0 - hi_q))
    if not t_lo > 0:
        t_lo = t_hi * 1e-3
    if t_hi <= t_lo:
        grid = np.linspace(0.0, max(t_hi, 1e-12), points)
    else:
        grid = np.geomspace(t_lo, t_hi, points)
    grid = np.concatenate([[0.0], grid, np.asarray(extra, dtype=float)])
    return np.unique(grid)


def _binomial_se(p, n):
    # Agresti-Coull adjustment keeps the error positive at p = 0 or 1
    n = np.asarray(n, dtype=float)
    pt = (p * n + 2.0) / (n + 4.0)
    return np.sqrt(pt * (1.0 - pt) / (n + 4.0))


def _is_empirical(model):
    return isinstance(model, Empirical)


def _violation(lhs, rhs, slack, names, coords):
    """Worst violation of ``lhs <= rhs + slack`` over all entries."""
    gap = rhs + slack - lhs
    margin = float(np.min(rhs - lhs))
    k = int(np.argmin(gap))
    if gap.flat[k] < 0:
        idx = np.unravel_index(k, gap.shape)
        witness = {n: float(c[i]) for n, c, i in zip(names, coords, idx)}
        witness.update(lhs=float(lhs[idx]), rhs=float(rhs[idx]))
        return witness, margin
    return None, margin


def _running_violation(values, se, k):
    """Worst ``values[:, j] > values[:, c]`` with ``j < c``, per row.

    Returns ``(row, j, c, gap, margin)`` where ``gap`` is the slack-adjusted
    difference (negative means violated) and ``margin`` the raw minimum of
    ``values[:, c] - max_{j<c} values[:, j]``.
    """
    rows, cols = values.shape
    best = (0, 0, 0, math.inf)
    margin = math.inf
    run = values[:, 0].copy()
    run_se = se[:, 0].copy()
    run_idx = np.zeros(rows, dtype=int)
    for c in range(1, cols):
        cur, cur_se = values[:, c], se[:, c]
        margin = min(margin, float(np.min(cur - run)))
        gap = cur + k * np.sqrt(run_se**2 + cur_se**2) - run
        i = int(np.argmin(gap))
        if gap[i] < best[3]:
            best = (i, int(run_idx[i]), c, float(gap[i]))
        upd = cur - k * cur_se > run - k * run_se
        run = np.where(upd, cur, run)
        run_se = np.where(upd, cur_se, run_se)
        run_idx = np.where(upd, c, run_idx)
    return (*best, margin)


def _check_dfr(model, t, z, k):
    st = model.sf(t)
    ratio = model.sf(z[:, None] + t[None, :]) / st[None, :]
    if _is_empirical(model):
        se = _binomial_se(ratio, model.n * st[None, :])
    else:
        se = np.zeros_like(ratio)
    if t.size < 2:
        return None, math.inf
    i, j, c, gap, margin = _running_violation(ratio, se, k)
    if gap < 0:
        return {"z": float(z[i]), "t1": float(t[j]), "t2": float(t[c]),
                "lhs": float(ratio[i, j]), "rhs": float(ratio[i, c])}, margin
    return None, margin


def _check_nwu(model, t, z, k):
    sz, st = model.sf(z), model.sf(t)
    lhs = sz[:, None] * st[None, :]
    rhs = model.sf(z[:, None] + t[None, :])
    if _is_empirical(model):
        ez, et = model.sf_se(z), model.sf_se(t)
        slack = k * np.sqrt((ez[:, None] * st[None, :]) ** 2 + (sz[:, None] * et[None, :]) ** 2
                            + model.sf_se(z[:, None] + t[None, :]) ** 2)
    else:
        slack = np.zeros_like(lhs)
    return _violation(lhs, rhs, slack, ("z", "t"), (z, t))


def _mrl_table(model, t):
    vals = [mean_residual_life(model, float(x)) for x in t]
    if any(v is None for v in vals):
        return None, None
    m = np.array(vals)
    if _is_empirical(model):
        se = np.array([_mrl_se(model, float(x)) for x in t])
    else:
        se = np.zeros_like(m)
    return m, se


def _mrl_se(model, t):
    rest = model.samples[model.samples > t] - t
    return float(rest.std(ddof=1) / math.sqrt(rest.size)) if rest.size > 1 else math.inf


def check_class(model: SurvivalModel, cls: str, grid=None, tol: float | None = None, *,
                z_grid=None, analytic: bool = True, k_se: float | None = None,
                confidence: float = 0.99) -> ClassVerdict:
    """Check ``model`` against DFR, NWU, NWUE or IMRL on a grid.

    ``grid`` defaults to :func:`default_grid`.  Closed-form families with a
    known verdict short-circuit when ``analytic`` is true; a known failure is
    still searched on the grid so that a witness can be reported.
    ``tol`` is an absolute slack (default 1e-9); empirical models add
    ``k_se`` standard errors per comparison.  By default ``k_se`` is the
    Bonferroni normal quantile at ``confidence`` over all comparisons the
    class makes on the grid, and never below 3.
    """
    cls = cls.upper()
    if cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}; expected one of {CLASSES}")
    tol = 1e-9 if tol is None else float(tol)
    t = default_grid(model) if grid is None else np.unique(np.asarray(grid, dtype=float))
    if t.size == 0 or np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("grid must be a nonempty set of finite nonnegative points")
    t = t[model.sf(t) > 0]
    if t.size == 0:
        raise ValueError("no grid point lies inside the support")
    z = t if z_grid is None else np.unique(np.asarray(z_grid, dtype=float))
    k = 0.0
    if _is_empirical(model):
        pairs = t.size * (t.size - 1) // 2
        tests = {"DFR": z.size * pairs, "NWU": z.size * t.size, "NWUE": t.size,
                 "IMRL": pairs}[cls]
        k = k_se if k_se is not None else max(3.0, z_value(confidence, max(tests, 1)))
    notes = ["grid-based check: the verdict covers the evaluated points only"]

    known = model.analytic.get(cls) if analytic else None
    if known is True:
        return ClassVerdict(HOLDS, notes=(f"analytic: {model.family} family is {cls}",),
                            details={"grid_points": int(t.size)})

    if cls == "DFR":
        witness, margin = _check_dfr(model, t, z, k)
        margin_tol = tol
    elif cls == "NWU":
        witness, margin = _check_nwu(model, t, z, k)
        margin_tol = tol
    else:
        m, se = _mrl_table(model, t)
        if m is None:
            return ClassVerdict(INCONCLUSIVE, notes=("mean residual life integral did not "
                                                     "converge within the horizon",))
        # quadrature noise scales with the MRL itself
        qtol = tol + MRL_REL_TOL * np.abs(m)
        if cls == "NWUE":
            mu = model.mean if model.mean is not None else m[0]
            lhs = np.full_like(m, mu)
            witness, margin = _violation(lhs, m, k * se + qtol, ("t",), (t,))
        else:
            witness, margin = None, math.inf
            if m.size > 1:
                _, j, c, gap, margin = _running_violation(m[None, :], se[None, :], k)
                if gap + float(np.max(qtol)) < 0:
                    witness = {"t1": float(t[j]), "t2": float(t[c]),
                               "lhs": float(m[j]), "rhs": float(m[c])}
        margin_tol = 0.0
    if witness is not None and margin_tol:
        # absolute tolerance for the closed-form comparisons
        if witness["lhs"] - witness["rhs"] <= margin_tol:
            witness = None
    if witness is not None:
        return ClassVerdict(FAILS, witness=witness, margin=margin, notes=tuple(notes))
    if known is False:
        notes.append(f"{model.family} family is analytically outside {cls} but the grid "
                     "shows no violation")
        return ClassVerdict(INCONCLUSIVE, margin=margin, notes=tuple(notes))
    return ClassVerdict(HOLDS, margin=margin, notes=tuple(notes),
                        details={"grid_points": int(t.size)})
