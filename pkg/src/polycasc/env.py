"""Disorder environments: site laws, cumulant generating functions, and
reproducible sampling of i.i.d. fields on the space-time cone of the walk."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import logsumexp

from .errors import BetaOutOfRange, PathOutsideField
from .rng import stream

GAUSSIAN = "standard-gaussian"
BERNOULLI = "symmetric-bernoulli"
FINITE_SUPPORT = "finite-support"

_KINDS = (GAUSSIAN, BERNOULLI, FINITE_SUPPORT)


@dataclass(frozen=True)
class DisorderLaw:
    """Distribution of a single environment variable omega(i, x).

    ``beta_max`` is the largest |beta| with a finite exponential moment;
    all built-in kinds are light-tailed enough that it defaults to +inf,
    but a finite value can be imposed to model laws that only have some
    exponential moments.
    """

    kind: str
    values: tuple[float, ...] | None = None
    probs: tuple[float, ...] | None = None
    beta_max: float = math.inf

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown disorder kind {self.kind!r}")
        if self.kind == FINITE_SUPPORT:
            if self.values is None or self.probs is None:
                raise ValueError("finite-support law needs values and probs")
            values = tuple(float(v) for v in self.values)
            probs = tuple(float(p) for p in self.probs)
            if len(values) != len(probs) or not values:
                raise ValueError("values and probs must be nonempty, same length")
            if min(probs) < 0:
                raise ValueError("probabilities must be nonnegative")
            if abs(sum(probs) - 1.0) > 1e-12:
                raise ValueError("probabilities must sum to 1 within 1e-12")
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "probs", probs)
        else:
            if self.values is not None or self.probs is not None:
                raise ValueError(f"{self.kind} takes no values/probs")
        if not self.beta_max > 0:
            raise ValueError("beta_max must be positive")

    @classmethod
    def gaussian(cls) -> "DisorderLaw":
        return cls(GAUSSIAN)

    @classmethod
    def bernoulli(cls) -> "DisorderLaw":
        return cls(BERNOULLI)

    @classmethod
    def finite_support(cls, values, probs, beta_max=math.inf) -> "DisorderLaw":
        return cls(FINITE_SUPPORT, tuple(values), tuple(probs), beta_max)

    def check_beta(self, beta: float) -> None:
        if abs(beta) > self.beta_max:
            raise BetaOutOfRange(
                f"|beta|={abs(beta)} exceeds beta_max={self.beta_max}"
            )

    def mean(self) -> float:
        if self.kind == FINITE_SUPPORT:
            return float(np.dot(self.values, self.probs))
        return 0.0

    def cumulant(self, beta: float) -> float:
        return cumulant(self, beta)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """i.i.d. draws with the given shape."""
        if self.kind == GAUSSIAN:
            return rng.standard_normal(size)
        if self.kind == BERNOULLI:
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def as_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == FINITE_SUPPORT:
            out["values"] = list(self.values)
            out["probs"] = list(self.probs)
        if math.isfinite(self.beta_max):
            out["beta_max"] = self.beta_max
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "DisorderLaw":
        return cls(
            obj["kind"],
            tuple(obj["values"]) if "values" in obj else None,
            tuple(obj["probs"]) if "probs" in obj else None,
            obj.get("beta_max", math.inf),
        )

    @classmethod
    def from_json(cls, text: str) -> "DisorderLaw":
        return cls.from_dict(json.loads(text))


def cumulant(law: DisorderLaw, beta: float) -> float:
    """log E[exp(beta * omega)], in closed form for the built-in kinds."""
    law.check_beta(beta)
    if beta == 0:
        return 0.0
    if law.kind == GAUSSIAN:
        return 0.5 * beta * beta
    if law.kind == BERNOULLI:
        # log cosh(beta), stable for large |beta|
        return float(np.logaddexp(beta, -beta) - math.log(2.0))
    logp = np.log(np.asarray(law.probs, dtype=float))
    return float(logsumexp(logp + beta * np.asarray(law.values, dtype=float)))


@dataclass(frozen=True)
class DisorderField:
    """One realization of the environment on the cone reachable from origin.

    ``slices[i-1]`` stores a dense box of shape (2i+1,)^d of draws for time
    slice i; only sites reachable by the simple walk (L1 distance <= i with
    matching parity) belong to the field's domain and are ever read.
    """

    n: int
    d: int
    origin: tuple[int, ...]
    law: DisorderLaw
    seed: int
    slices: tuple[np.ndarray, ...]

    def reachable(self, i: int, x) -> bool:
        if not 1 <= i <= self.n:
            return False
        v = self._rel(x)
        dist = sum(abs(c) for c in v)
        return dist <= i and (dist - i) % 2 == 0

    def value(self, i: int, x) -> float:
        """omega(i, x); raises PathOutsideField off the reachable cone."""
        if not self.reachable(i, x):
            raise PathOutsideField(f"site (i={i}, x={x}) not in the cone")
        v = self._rel(x)
        idx = tuple(c + i for c in v)
        return float(self.slices[i - 1][idx])

    def cone_sites(self) -> list[tuple[int, tuple[int, ...]]]:
        """All (i, x) of the domain, times ascending, sites lexicographic."""
        out = []
        for i in range(1, self.n + 1):
            for rel in product(range(-i, i + 1), repeat=self.d):
                dist = sum(abs(c) for c in rel)
                if dist <= i and (dist - i) % 2 == 0:
                    out.append((i, tuple(r + o for r, o in zip(rel, self.origin))))
        return out

    def slice_box(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.n:
            raise PathOutsideField(f"time {i} outside horizon {self.n}")
        return self.slices[i - 1]

    def _rel(self, x) -> tuple[int, ...]:
        if self.d == 1 and isinstance(x, (int, np.integer)):
            x = (int(x),)
        x = tuple(int(c) for c in x)
        if len(x) != self.d:
            raise PathOutsideField(f"point {x} has wrong dimension (d={self.d})")
        return tuple(c - o for c, o in zip(x, self.origin))


def sample_field(law: DisorderLaw, n: int, d: int = 1, origin=None, seed: int = 0) -> DisorderField:
    """Sample a fresh field; identical (law, n, d, origin, seed) reproduce it.

    Slice i is drawn from its own derived stream, so the values on slice i
    do not depend on the horizon n.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if origin is None:
        origin = (0,) * d
    elif isinstance(origin, (int, np.integer)):
        origin = (int(origin),)
    origin = tuple(int(c) for c in origin)
    if len(origin) != d:
        raise ValueError("origin has wrong dimension")
    slices = []
    for i in range(1, n + 1):
        rng = stream(seed, "disorder-slice", i)
        slices.append(law.sample(rng, (2 * i + 1,) * d))
    return DisorderField(n, d, origin, law, int(seed), tuple(slices))
