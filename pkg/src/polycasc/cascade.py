"""Multiplicative cascades and the block-tree approximation of the polymer.

A block tree with block length m keeps the exact disorder correlations
inside m-step windows and resamples independent disorder across windows.
Formally it is a multiplicative cascade whose family vector is the joint
law of the m-step point-to-point partition functions.  Exact recursive
samplers cover small trees; population dynamics on the recursive
distributional equation covers deep ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import lattice
from .env import DisorderLaw, cumulant, sample_field
from .errors import TreeTooLarge, UnreachableEndpoint
from .rng import stream

DEFAULT_NODE_CAP = 10**6


@dataclass(frozen=True)
class Alphabet:
    """Points reachable by the walk in exactly m steps (the family index set)."""

    m: int
    d: int
    points: tuple[tuple[int, ...], ...]

    @classmethod
    def build(cls, m: int, d: int = 1) -> "Alphabet":
        if m < 1 or d < 1:
            raise ValueError("need m >= 1 and d >= 1")
        pts = []
        for rel in product(range(-m, m + 1), repeat=d):
            dist = sum(abs(c) for c in rel)
            if dist <= m and (dist - m) % 2 == 0:
                pts.append(tuple(rel))
        return cls(m, d, tuple(sorted(pts)))

    @property
    def size(self) -> int:
        return len(self.points)

    def offsets_1d(self) -> np.ndarray:
        if self.d != 1:
            raise ValueError("offsets_1d needs d = 1")
        return np.array([p[0] for p in self.points], dtype=np.int64)


@dataclass(frozen=True)
class CascadeWeightLaw:
    """Sampler spec for one family vector (Z_m(x))_{x in L_m}.

    In mean-one mode each entry is divided by exp(m*lambda(beta)), so the
    entries sum to 1 in expectation and the cascade is a martingale.
    """

    alphabet: Alphabet
    beta: float
    law: DisorderLaw
    mean_one: bool = True

    def __post_init__(self):
        self.law.check_beta(self.beta)

    def with_mean_one(self, flag: bool) -> "CascadeWeightLaw":
        return CascadeWeightLaw(self.alphabet, self.beta, self.law, flag)

    def lam(self) -> float:
        return cumulant(self.law, self.beta)


@dataclass
class PopulationPool:
    """Samples of the normalized tree partition value at one cascade level."""

    level: int
    samples: np.ndarray

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def to_csv_rows(self) -> list[list]:
        return [[self.level, i, float(v)] for i, v in enumerate(self.samples)]


@dataclass(frozen=True)
class FreeEnergyEstimate:
    """Monte Carlo free-energy estimate; ``per`` states the normalization."""

    value: float
    stderr: float
    per: str  # "block" or "step"
    levels: int
    replicas: int
    converged: bool = True
    label: str = ""

    def per_step(self, m: int) -> tuple[float, float]:
        if self.per == "step":
            return self.value, self.stderr
        return self.value / m, self.stderr / m

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "per": self.per,
            "levels": self.levels,
            "replicas": self.replicas,
            "converged": self.converged,
            "label": self.label,
        }


# ---------------------------------------------------------------------------
# Family vector sampling
# ---------------------------------------------------------------------------

def block_weights(wlaw: CascadeWeightLaw, seed: int) -> np.ndarray:
    """One correlated draw of (Z_m(x))_{x in L_m} from a fresh field."""
    ab = wlaw.alphabet
    fld = sample_field(wlaw.law, ab.m, ab.d, seed=seed)
    sl = lattice.transfer_point_to_point(fld, wlaw.beta)
    vec = np.exp(sl.logz)
    # transfer returns endpoints sorted, matching the alphabet order
    assert sl.points == ab.points
    if wlaw.mean_one:
        vec = vec * math.exp(-ab.m * wlaw.lam())
    return vec


def block_weight_matrix(wlaw: CascadeWeightLaw, batch: int, rng: np.random.Generator) -> np.ndarray:
    """(batch, |L_m|) fresh family draws; d=1 vectorized transfer."""
    ab = wlaw.alphabet
    if ab.d != 1:
        raise ValueError("batched family draws are implemented for d = 1")
    draw = lattice.normalized_weight_sampler(wlaw.law, wlaw.beta)
    u = lattice._u_sweep(batch, ab.m, lambda i: draw(rng, (batch, i + 1)))
    if not wlaw.mean_one:
        u = u * math.exp(ab.m * wlaw.lam())
    return u


# ---------------------------------------------------------------------------
# Exact recursive samplers (small trees)
# ---------------------------------------------------------------------------

def _check_tree_size(n_letters: int, levels: int, node_cap: int) -> int:
    if levels < 1:
        raise ValueError("need at least one level")
    families = (n_letters**levels - 1) // (n_letters - 1) if n_letters > 1 else levels
    if families > node_cap:
        raise TreeTooLarge(f"{families} weight families exceed cap {node_cap}")
    return families


def sample_cascade_batch(
    wlaw: CascadeWeightLaw,
    n_levels: int,
    replicas: int,
    seed: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    chunk: int = 4096,
) -> np.ndarray:
    """Exact point-to-line cascade samples, fresh weights at every node."""
    n = wlaw.alphabet.size
    _check_tree_size(n, n_levels, node_cap)

    def worker(c, size):
        rng = stream(seed, "cascade-exact", c)
        t = np.ones((size, n**n_levels))
        for depth in range(n_levels, 0, -1):
            fam = n ** (depth - 1)
            a = block_weight_matrix(wlaw, size * fam, rng).reshape(size, fam, n)
            t = (a * t.reshape(size, fam, n)).sum(axis=2)
        return t[:, 0]

    return np.concatenate(lattice.run_chunked(replicas, chunk, worker))


def sample_cascade(wlaw, n_levels: int, seed: int, node_cap: int = DEFAULT_NODE_CAP) -> float:
    """One exact cascade sample W_l = sum over words of weight products."""
    return float(sample_cascade_batch(wlaw, n_levels, 1, seed, node_cap=node_cap)[0])


def sample_mtree_p2p_batch(
    wlaw: CascadeWeightLaw,
    n_levels: int,
    replicas: int,
    seed: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    chunk: int = 2048,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact point-to-point tree vectors over L_{m * levels} (d = 1).

    Returns (offsets, matrix) with matrix[r, j] the tree partition value at
    endpoint offsets[j]; summing over j gives the point-to-line sample.
    """
    ab = wlaw.alphabet
    if ab.d != 1:
        raise ValueError("exact point-to-point trees are implemented for d = 1")
    n = ab.size
    m = ab.m
    _check_tree_size(n, n_levels, node_cap)
    offsets = np.arange(-m * n_levels, m * n_levels + 1, 2)

    def worker(c, size):
        rng = stream(seed, "mtree-p2p-exact", c)
        dim = 1
        t = np.ones((size, n**n_levels, 1))
        for depth in range(n_levels, 0, -1):
            fam = n ** (depth - 1)
            a = block_weight_matrix(wlaw, size * fam, rng).reshape(size, fam, n)
            tc = t.reshape(size, fam, n, dim)
            out = np.zeros((size, fam, dim + m))
            for xi in range(n):
                out[:, :, xi : xi + dim] += a[:, :, xi : xi + 1] * tc[:, :, xi, :]
            t = out
            dim += m
        return t[:, 0, :]

    mat = np.concatenate(lattice.run_chunked(replicas, chunk, worker))
    return offsets, mat


def sample_mtree_p2p(wlaw, n_levels: int, seed: int, node_cap: int = DEFAULT_NODE_CAP):
    """One exact point-to-point tree draw: (offsets, vector over endpoints)."""
    offs, mat = sample_mtree_p2p_batch(wlaw, n_levels, 1, seed, node_cap=node_cap)
    return offs, mat[0]


# ---------------------------------------------------------------------------
# Population dynamics (deep trees)
# ---------------------------------------------------------------------------

def pool_levels(wlaw: CascadeWeightLaw, n_levels: int, pool_size: int, seed: int):
    """Yield (level, samples) for the point-to-line recursive equation.

    Level l+1 samples combine one fresh family draw with |L_m| independent
    with-replacement picks from the level-l pool: W' = sum_x A_x W^(x).
    """
    if pool_size < 10**3:
        raise ValueError("pool_size must be at least 1000")
    n = wlaw.alphabet.size
    rng = stream(seed, "mtree-pool")
    cur = np.ones(pool_size)
    yield 0, cur
    for level in range(1, n_levels + 1):
        a = block_weight_matrix(wlaw, pool_size, rng)
        new = np.zeros(pool_size)
        for xi in range(n):
            picks = rng.integers(0, pool_size, size=pool_size)
            new += a[:, xi] * cur[picks]
        cur = new
        yield level, cur


def sample_mtree_pool(wlaw, n_levels: int, pool_size: int, seed: int) -> PopulationPool:
    """Level-n pool of normalized tree partition samples."""
    samples = None
    for level, cur in pool_levels(wlaw, n_levels, pool_size, seed):
        samples = cur
    return PopulationPool(n_levels, samples.copy())


def mtree_p2p_pool_batch(
    law: DisorderLaw,
    beta: float,
    m: int,
    n_levels: int,
    endpoint: int,
    replicas: int,
    seed: int,
    *,
    chunk: int = 20000,
) -> np.ndarray:
    """Mean-normalized point-to-point tree samples at a fixed endpoint (d=1).

    Runs the recursive distributional equation on vectors normalized by
    their exact means: the level-l entry at offset z is Z_l(z) divided by
    exp(l*m*lambda) * P(x_{lm} = z), so every entry has mean exactly 1.
    The endpoint windows are pruned to offsets that can still reach the
    target, and the deterministic walk-probability ratios are folded into
    the update coefficients.  Marginal laws are exact up to the O(1/pool)
    resampling bias of population dynamics.
    """
    from ._kernels import pool_update

    horizon = m * n_levels
    if abs(endpoint) > horizon or (endpoint + horizon) % 2:
        raise UnreachableEndpoint(f"endpoint {endpoint} unreachable at time {horizon}")
    ab = Alphabet.build(m, 1)
    wlaw = CascadeWeightLaw(ab, beta, law, mean_one=True)
    xs = ab.offsets_1d()

    # per-level windows and coefficient matrices
    lows, widths = [0], [1]
    for level in range(1, n_levels + 1):
        lo = max(-level * m, endpoint - (n_levels - level) * m)
        hi = min(level * m, endpoint + (n_levels - level) * m)
        lo += (lo - level * m) % 2
        hi -= (hi - level * m) % 2
        lows.append(lo)
        widths.append((hi - lo) // 2 + 1)
    coeffs, shift_arrays = [], []
    for level in range(1, n_levels + 1):
        w = widths[level]
        ys = lows[level] + 2 * np.arange(w)
        logp_new = lattice.log_walk_prob(level * m, ys)
        cmat = np.zeros((ab.size, w))
        smap = np.zeros(ab.size, dtype=np.int64)
        for xi, x in enumerate(xs):
            with np.errstate(divide="ignore"):
                cmat[xi] = np.exp(lattice.log_walk_prob((level - 1) * m, ys - x) - logp_new)
            smap[xi] = (lows[level] - x - lows[level - 1]) // 2
        coeffs.append(np.ascontiguousarray(cmat))
        shift_arrays.append(smap)

    max_w = max(widths)

    def worker(c, size):
        rng = stream(seed, "mtree-p2p-pool", c)
        buf_a = np.empty((size, max_w))
        buf_b = np.empty((size, max_w))
        buf_a[:, 0] = 1.0
        old, new, old_w = buf_a, buf_b, 1
        for level in range(1, n_levels + 1):
            abar = np.ascontiguousarray(block_weight_matrix(wlaw, size, rng))
            picks = rng.integers(0, size, size=(ab.size, size))
            pool_update(new, widths[level], old, old_w, picks, abar,
                        coeffs[level - 1], shift_arrays[level - 1])
            old, new, old_w = new, old, widths[level]
        return old[:, 0].copy()

    return np.concatenate(lattice.run_chunked(replicas, chunk, worker))


# ---------------------------------------------------------------------------
# Free-energy estimation
# ---------------------------------------------------------------------------

def estimate_free_energy_tree(
    wlaw: CascadeWeightLaw, n_levels: int, pool_size: int, seed: int
) -> FreeEnergyEstimate:
    """Per-block tree free energy: m*lambda plus the asymptotic slope of
    E[log W_l], estimated from level increments over the last half."""
    if n_levels < 10:
        raise ValueError("need n_levels >= 10")
    mean_log = []
    for level, samples in pool_levels(wlaw.with_mean_one(True), n_levels, pool_size, seed):
        if level > 0:
            mean_log.append(np.log(samples).mean())
    mean_log = np.array(mean_log)
    incr = np.diff(np.concatenate([[0.0], mean_log]))
    tail = incr[n_levels // 2 :]
    slope = float(tail.mean())
    stderr = float(tail.std(ddof=1) / math.sqrt(len(tail))) if len(tail) > 1 else 0.0
    # drift check: a linear trend in the tail increments signals non-convergence
    converged = True
    if len(tail) > 3 and stderr > 0:
        x = np.arange(len(tail), dtype=float)
        x -= x.mean()
        trend = float(np.dot(x, tail) / np.dot(x, x))
        resid = tail - tail.mean() - trend * x
        trend_se = math.sqrt(
            (resid @ resid) / max(len(tail) - 2, 1) / float(np.dot(x, x))
        )
        if trend_se > 0 and abs(trend) / trend_se > 3:
            converged = False
    value = wlaw.alphabet.m * wlaw.lam() + slope
    return FreeEnergyEstimate(
        value, stderr, "block", n_levels, pool_size, converged,
        label=f"tree m={wlaw.alphabet.m} beta={wlaw.beta}",
    )


def estimate_free_energy_lattice(
    law: DisorderLaw, beta: float, n: int, replicas: int, seed: int, threads: int = 1
) -> FreeEnergyEstimate:
    """Per-step polymer free energy from (1/n) log Z_n over replicas."""
    if n < 50:
        raise ValueError("need n >= 50 for the lattice estimate")
    logw = lattice.sample_point_to_line_batch(
        law, beta, n, replicas, seed, return_log=True, threads=threads
    )
    per_step = cumulant(law, beta) + logw / n
    value = float(per_step.mean())
    stderr = float(per_step.std(ddof=1) / math.sqrt(replicas))
    return FreeEnergyEstimate(
        value, stderr, "step", n, replicas, True, label=f"lattice n={n} beta={beta}"
    )


@dataclass
class UpperBoundReport:
    """Polymer free energy against the per-step tree bound for each m."""

    beta: float
    lattice_estimate: FreeEnergyEstimate
    tree_estimates: dict[int, FreeEnergyEstimate]
    margins: dict[int, float]
    margin_sigmas: dict[int, float]
    consistent: bool

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "lattice": self.lattice_estimate.as_dict(),
            "trees": {str(m): e.as_dict() for m, e in self.tree_estimates.items()},
            "margins": {str(m): v for m, v in self.margins.items()},
            "margin_sigmas": {str(m): v for m, v in self.margin_sigmas.items()},
            "consistent": self.consistent,
        }


def upper_bound_check(
    law: DisorderLaw,
    beta: float,
    m_list,
    n: int,
    replicas: int,
    seed: int,
    *,
    pool_size: int = 10**4,
    n_levels: int = 20,
    threads: int = 1,
) -> UpperBoundReport:
    """Check p_lattice <= min_m (1/m) p_tree(m) with 3-sigma margin accounting."""
    lat = estimate_free_energy_lattice(law, beta, n, replicas, seed, threads=threads)
    trees: dict[int, FreeEnergyEstimate] = {}
    margins: dict[int, float] = {}
    sigmas: dict[int, float] = {}
    consistent = True
    for m in m_list:
        wlaw = CascadeWeightLaw(Alphabet.build(m, 1), beta, law, mean_one=True)
        est = estimate_free_energy_tree(wlaw, n_levels, pool_size, seed)
        trees[m] = est
        v, s = est.per_step(m)
        margins[m] = v - lat.value
        sigmas[m] = math.sqrt(s**2 + lat.stderr**2)
        if margins[m] < -3 * sigmas[m] - 1e-12:
            consistent = False
    return UpperBoundReport(beta, lat, trees, margins, sigmas, consistent)
