"""Interarrival processes, arrival paths and counts.

Variants
--------
iid_renewal          X_n iid ~ A
equilibrium_renewal  X_1 ~ equilibrium(A), X_2, X_3, ... iid ~ A
pure_birth           X_n ~ Exp(rate_n), independent (``yule`` is rate_n = n * lam)
independent          X_n ~ marginal(n), independent
product              X_n = Y_1 * ... * Y_n, Y_i independent on [0, 1]
reciprocal_sum       X_n = 1 / (z + Y_1 + ... + Y_n), Y_i independent
custom               user-supplied joint sampler

Sampling is vectorised over paths: ``sample(rng, n, paths)`` returns an
array of shape ``(paths, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distmodel import (
    Exponential,
    ModelError,
    SurvivalModel,
    equilibrium_transform,
)
from .streams import as_seed_sequence, generator

__all__ = [
    "ProcessError",
    "RateSequence",
    "InterarrivalProcess",
    "ArrivalPath",
    "Count",
    "build_process",
    "iid_renewal",
    "equilibrium_renewal",
    "pure_birth",
    "yule",
    "independent",
    "product",
    "reciprocal_sum",
    "custom",
    "sample_interarrivals",
    "count_at",
    "count_paths",
]

VARIANTS = ("iid_renewal", "equilibrium_renewal", "pure_birth", "independent",
            "product", "reciprocal_sum", "custom")

# association provenance tags
INDEPENDENT = "independent-components"
MONOTONE_IMAGE = "monotone-image-of-independent"


class ProcessError(ModelError):
    """A process specification violates its variant's requirements."""


@dataclass(frozen=True)
class RateSequence:
    """Birth rates ``rate(n)`` for ``n = 1, 2, ...``.

    Either affine, ``a + b * n``, or an explicit list whose tail rule is
    ``"hold"`` (repeat the last rate) or ``"affine"`` (continue with the
    last difference).
    """

    a: float = 0.0
    b: float = 0.0
    values: tuple[float, ...] = ()
    tail: str = "hold"

    @classmethod
    def affine(cls, a: float, b: float) -> RateSequence:
        return cls(a=float(a), b=float(b))

    @classmethod
    def explicit(cls, values: Sequence[float], tail: str = "hold") -> RateSequence:
        if len(values) == 0:
            raise ProcessError("explicit rate list is empty")
        if tail not in ("hold", "affine"):
            raise ProcessError(f"unknown tail rule {tail!r}")
        return cls(values=tuple(float(v) for v in values), tail=tail)

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if not self.values:
            return self.a + self.b * n
        v = np.asarray(self.values)
        m = v.size
        idx = np.clip(n.astype(int) - 1, 0, m - 1)
        out = v[idx]
        if self.tail == "affine" and m >= 2:
            step = v[-1] - v[-2]
            out = np.where(n > m, v[-1] + step * (n - m), out)
        return out

    def validate(self, n: int, increasing: bool) -> None:
        r = self(np.arange(1, n + 1))
        if np.any(~(r > 0)):
            k = int(np.argmax(~(r > 0))) + 1
            raise ProcessError(f"pure birth rates must be positive; rate_{k} = {r[k - 1]}")
        if increasing and np.any(np.diff(r) < 0):
            k = int(np.argmax(np.diff(r) < 0)) + 1
            raise ProcessError("rates lambda_n must be increasing in n for the d-DFR scenario; "
                               f"rate_{k + 1} = {r[k]} < rate_{k} = {r[k - 1]}")

    def describe(self):
        if self.values:
            return {"values": list(self.values), "tail": self.tail}
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class InterarrivalProcess:
    variant: str
    params: dict = field(default_factory=dict)
    #: closed-form marginal of X_n, or None
    marginal: Callable[[int], SurvivalModel] | None = None
    #: "independent-components", "monotone-image-of-independent" or None
    provenance: str | None = None
    _draw: Callable = field(default=None, repr=False, compare=False)

    def sample(self, rng: np.random.Generator, n: int, paths: int | None = None) -> np.ndarray:
        """Joint draw of ``X_1..X_n``; shape ``(n,)`` or ``(paths, n)``."""
        if n < 1:
            raise ValueError("need n >= 1 interarrivals")
        out = np.asarray(self._draw(rng, int(n), 1 if paths is None else int(paths)),
                         dtype=float)
        return out[0] if paths is None else out

    def pair(self) -> JointSampler:
        """Sampler of ``(X_1, X_2)`` carrying the association provenance."""
        return JointSampler(lambda rng, size: self.sample(rng, 2, size), dim=2,
                            provenance=self.provenance)

    def conditional_pair(self, prefix: np.ndarray) -> JointSampler | None:
        """Distributional version of ``(X_{n+1}, X_{n+2})`` given ``X_1..X_n``.

        Only available for variants whose conditional law is explicit.
        """
        prefix = np.asarray(prefix, dtype=float)
        n = prefix.size
        v, p = self.variant, self.params
        if v in ("iid_renewal", "equilibrium_renewal", "pure_birth", "independent"):
            def draw(rng, size):
                x = self.sample(rng, n + 2, size)
                return x[:, n:]
            return JointSampler(draw, dim=2, provenance=INDEPENDENT)
        if v == "product":
            c = float(np.prod(prefix)) if n else 1.0
            Y = p["Y"]

            def draw(rng, size):
                y1, y2 = Y.sample(rng, size), Y.sample(rng, size)
                return np.column_stack([c * y1, c * y1 * y2])
            return JointSampler(draw, dim=2, provenance=MONOTONE_IMAGE)
        if v == "reciprocal_sum":
            if n == 0:
                c = p["z"]
            else:
                if not prefix[-1] > 0:
                    return None
                c = 1.0 / prefix[-1]
            Y = p["Y"]

            def draw(rng, size):
                y1, y2 = Y.sample(rng, size), Y.sample(rng, size)
                with np.errstate(divide="ignore"):
                    return np.column_stack([1.0 / (c + y1), 1.0 / (c + y1 + y2)])
            return JointSampler(draw, dim=2, provenance=MONOTONE_IMAGE)
        return None

    def describe(self) -> dict:
        out = {"variant": self.variant}
        for k, v in self.params.items():
            out[k] = v.describe() if hasattr(v, "describe") else v
        return out


@dataclass(frozen=True)
class JointSampler:
    """Sampler of a nonnegative random vector: ``draw(rng, size) -> (size, dim)``."""

    draw: Callable[[np.random.Generator, int], np.ndarray]
    dim: int
    provenance: str | None = None

    def __call__(self, rng, size):
        return np.asarray(self.draw(rng, size), dtype=float).reshape(size, self.dim)


def _check_model(m, what):
    if not isinstance(m, SurvivalModel):
        raise ProcessError(f"{what} must be a SurvivalModel, got {type(m).__name__}")
    if m.zero_atom >= 1.0:
        raise ProcessError(f"{what} is degenerate at 0")


def iid_renewal(A: SurvivalModel) -> InterarrivalProcess:
    _check_model(A, "interarrival distribution")

    def draw(rng, n, paths):
        return A.sample(rng, (paths, n))
    return InterarrivalProcess("iid_renewal", {"A": A}, marginal=lambda k: A,
                               provenance=INDEPENDENT, _draw=draw)


def equilibrium_renewal(A: SurvivalModel) -> InterarrivalProcess:
    _check_model(A, "interarrival distribution")
    E = equilibrium_transform(A)

    def draw(rng, n, paths):
        first = E.sample(rng, paths)
        if n == 1:
            return first[:, None]
        return np.column_stack([first, A.sample(rng, (paths, n - 1))])
    return InterarrivalProcess("equilibrium_renewal", {"A": A, "X1": E},
                               marginal=lambda k: E if k == 1 else A,
                               provenance=INDEPENDENT, _draw=draw)


def pure_birth(rates: RateSequence | Sequence[float] | Callable, *,
               require_increasing: bool = False, check_upto: int = 1000) -> InterarrivalProcess:
    """Independent ``X_n ~ Exp(rates(n))``."""
    if not isinstance(rates, RateSequence):
        rates = RateSequence.explicit(list(rates))
    rates.validate(check_upto, require_increasing)

    def draw(rng, n, paths):
        r = rates(np.arange(1, n + 1))
        return rng.exponential(1.0, (paths, n)) / r
    return InterarrivalProcess("pure_birth", {"rates": rates},
                               marginal=lambda k: Exponential(float(rates(k))),
                               provenance=INDEPENDENT, _draw=draw)


def yule(lam: float, **kw) -> InterarrivalProcess:
    if not lam > 0:
        raise ProcessError("yule rate must be positive")
    return pure_birth(RateSequence.affine(0.0, lam), **kw)


def independent(marginal: Callable[[int], SurvivalModel], *,
                scaled: tuple[SurvivalModel, Callable[[int], float]] | None = None
                ) -> InterarrivalProcess:
    """Independent ``X_n ~ marginal(n)``.

    ``scaled=(W, c)`` is the fast path ``X_n = c(n) * W_n`` with ``W_n`` iid.
    """
    if scaled is not None:
        W, c = scaled
        _check_model(W, "base distribution")

        def draw(rng, n, paths):
            cn = np.array([c(k) for k in range(1, n + 1)], dtype=float)
            return W.sample(rng, (paths, n)) * cn
    else:
        _check_model(marginal(1), "X_1")

        def draw(rng, n, paths):
            cols = [marginal(k).sample(rng, paths) for k in range(1, n + 1)]
            return np.column_stack(cols)
    return InterarrivalProcess("independent", {}, marginal=marginal,
                               provenance=INDEPENDENT, _draw=draw)


def product(Y: SurvivalModel) -> InterarrivalProcess:
    """``X_n = Y_1 * ... * Y_n`` with ``Y_i`` iid on ``[0, 1]``."""
    _check_model(Y, "factor distribution Y")
    if Y.sf(1.0) > 0:
        raise ProcessError("product process needs each Y_i to have support on [0, 1]")

    def draw(rng, n, paths):
        return np.cumprod(Y.sample(rng, (paths, n)), axis=1)
    return InterarrivalProcess("product", {"Y": Y}, provenance=MONOTONE_IMAGE, _draw=draw)


def reciprocal_sum(Y: SurvivalModel, z: float = 0.0) -> InterarrivalProcess:
    """``X_n = 1 / (z + Y_1 + ... + Y_n)`` with ``Y_i`` iid nonnegative."""
    if not isinstance(Y, SurvivalModel):
        raise ProcessError("factor distribution Y must be a SurvivalModel")
    if not z >= 0 or not math.isfinite(z):
        raise ProcessError(f"offset z must be a finite nonnegative number, got {z}")
    if z == 0 and Y.zero_atom > 0:
        raise ProcessError("with z = 0 the process needs P(Y_1 > 0) = 1")

    def draw(rng, n, paths):
        s = z + np.cumsum(Y.sample(rng, (paths, n)), axis=1)
        return 1.0 / s
    return InterarrivalProcess("reciprocal_sum", {"Y": Y, "z": float(z)},
                               provenance=MONOTONE_IMAGE, _draw=draw)


def custom(sampler: Callable[[np.random.Generator, int, int], np.ndarray]) -> InterarrivalProcess:
    """User joint sampler ``sampler(rng, n, paths) -> (paths, n)``."""
    return InterarrivalProcess("custom", {}, provenance=None, _draw=sampler)


def build_process(spec: dict) -> InterarrivalProcess:
    """Build a process from ``{"variant": ..., **params}`` with model objects."""
    spec = dict(spec)
    variant = spec.pop("variant", None)
    if variant == "yule":
        return yule(spec.pop("lam"), **spec)
    if variant not in VARIANTS:
        raise ProcessError(f"unknown process variant {variant!r}")
    builders = {
        "iid_renewal": iid_renewal,
        "equilibrium_renewal": equilibrium_renewal,
        "pure_birth": pure_birth,
        "independent": independent,
        "product": product,
        "reciprocal_sum": reciprocal_sum,
        "custom": custom,
    }
    try:
        return builders[variant](**spec)
    except TypeError as exc:
        raise ProcessError(f"bad parameters for {variant}: {exc}") from None


def sample_interarrivals(proc: InterarrivalProcess, n: int, rng) -> np.ndarray:
    """One joint draw of ``X_1..X_n``.

    ``rng`` may be a Generator (advanced in place), a SeedSequence or an int.
    """
    if not isinstance(rng, np.random.Generator):
        rng = generator(as_seed_sequence(rng))
    return proc.sample(rng, n)


# ---------------------------------------------------------------- counting

@dataclass(frozen=True)
class ArrivalPath:
    """Arrival times ``S_1 <= S_2 <= ...`` of one path."""

    s: np.ndarray

    @classmethod
    def from_interarrivals(cls, x) -> ArrivalPath:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("interarrival times must be nonnegative")
        return cls(np.cumsum(x))

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if np.any(np.diff(s) < 0):
            raise ValueError("arrival times must be nondecreasing")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)


class Count(int):
    """``N(t)`` with a truncation flag (the path ended before ``t``)."""

    truncated: bool

    def __new__(cls, value: int, truncated: bool = False):
        obj = super().__new__(cls, value)
        obj.truncated = bool(truncated)
        return obj

    def __repr__(self):
        return f"Count({int(self)}, truncated={self.truncated})"


def count_at(path: ArrivalPath | Sequence[float], t: float) -> Count:
    """``max{n : S_n <= t}``; flagged as a lower bound if ``S_last <= t``."""
    s = path.s if isinstance(path, ArrivalPath) else np.asarray(path, dtype=float)
    n = int(np.searchsorted(s, t, side="right"))
    return Count(n, truncated=(n == s.size))


def count_paths(S: np.ndarray, t: np.ndarray):
    """Vectorised :func:`count_at` over rows of ``S``; returns ``(counts, truncated)``."""
    S = np.asarray(S, dtype=float)
    t = np.asarray(t, dtype=float)
    counts = np.count_nonzero(S <= t[:, None], axis=1)
    return counts, counts == S.shape[1]
