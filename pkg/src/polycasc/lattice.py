"""Directed-polymer partition functions on Z^d.

Two layers live here.  The contract layer works on a single sampled
DisorderField: log-domain transfer matrix, path enumeration, Hamiltonians.
The replica layer runs vectorized transfer sweeps across many independent
environments at once (d=1), generating disorder on the fly so that large
horizons never materialize a field.  All partition arithmetic is carried
either in log domain or in mean-normalized linear domain; raw linear domain
is never used for long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import gammaln, logsumexp

from .env import BERNOULLI, DisorderField, DisorderLaw, cumulant
from .errors import (
    HorizonExceeded,
    PathOutsideField,
    TooManyPaths,
    UnreachableEndpoint,
)
from .rng import stream

DEFAULT_PATH_CAP = 2**20


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolymerPath:
    """Nearest-neighbor walk x_1..x_n started adjacent to the origin."""

    steps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("empty path")
        d = len(self.steps[0])
        prev = (0,) * d
        for x in self.steps:
            if len(x) != d:
                raise ValueError("inconsistent dimension along path")
            if sum(abs(a - b) for a, b in zip(x, prev)) != 1:
                raise ValueError(f"non nearest-neighbor step {prev} -> {x}")
            prev = x

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def d(self) -> int:
        return len(self.steps[0])


@dataclass(frozen=True)
class PartitionSlice:
    """Log-domain point-to-point values Z_{k,n}^{x0}(y) at time slice n.

    Only endpoints reachable from x0 in n-k steps are present; an absent
    endpoint means Z = 0.
    """

    k: int
    n: int
    x0: tuple[int, ...]
    beta: float
    points: tuple[tuple[int, ...], ...]
    logz: np.ndarray

    def logz_at(self, y) -> float:
        y = _as_point(y, len(self.x0))
        try:
            idx = self.points.index(y)
        except ValueError:
            raise UnreachableEndpoint(f"endpoint {y} not reachable") from None
        return float(self.logz[idx])

    def point_to_line_log(self) -> float:
        return float(logsumexp(self.logz))

    def to_csv_rows(self) -> list[list]:
        rows = []
        for y, lz in zip(self.points, self.logz):
            rows.append([self.k, self.n, *y, float(lz)])
        return rows


def _as_point(x, d: int) -> tuple[int, ...]:
    if isinstance(x, (int, np.integer)):
        x = (int(x),)
    x = tuple(int(c) for c in x)
    if len(x) != d:
        raise ValueError(f"point {x} has wrong dimension {len(x)} != {d}")
    return x


# ---------------------------------------------------------------------------
# Contract operations on a single field
# ---------------------------------------------------------------------------

def transfer_point_to_point(
    field: DisorderField, beta: float, x0=None, k: int = 0, n: int | None = None
) -> PartitionSlice:
    """Dynamic-programming evaluation of Z_{k,n}^{x0}(y) in log domain.

    Each step averages over all 2d signed unit moves with weight 1/(2d) and
    collects exp(beta * omega) at the arrival site, so beta=0 returns the
    walk transition probabilities.
    """
    field.law.check_beta(beta)
    if n is None:
        n = field.n
    if not (0 <= k < n <= field.n):
        raise HorizonExceeded(f"need 0 <= k < n <= {field.n}, got k={k}, n={n}")
    d = field.d
    x0 = field.origin if x0 is None else _as_point(x0, d)
    if k == 0:
        if x0 != field.origin:
            raise PathOutsideField("start point at time 0 must be the field origin")
    elif not field.reachable(k, x0):
        raise PathOutsideField(f"start (k={k}, x0={x0}) outside the cone")

    log2d = math.log(2 * d)
    moves = [tuple(s * int(i == j) for j in range(d)) for i in range(d) for s in (1, -1)]
    states: dict[tuple[int, ...], float] = {x0: 0.0}
    for t in range(k + 1, n + 1):
        incoming: dict[tuple[int, ...], list[float]] = {}
        for x, lz in states.items():
            for mv in moves:
                y = tuple(a + b for a, b in zip(x, mv))
                incoming.setdefault(y, []).append(lz)
        states = {}
        for y, vals in incoming.items():
            w = beta * field.value(t, y)
            states[y] = float(logsumexp(vals)) - log2d + w
    points = tuple(sorted(states))
    logz = np.array([states[y] for y in points], dtype=float)
    return PartitionSlice(k, n, x0, float(beta), points, logz)


def log_point_to_line(field: DisorderField, beta: float) -> float:
    return transfer_point_to_point(field, beta).point_to_line_log()


def point_to_line(field: DisorderField, beta: float) -> float:
    """Z_n = sum_y Z_{0,n}(y); positive and finite."""
    return float(math.exp(log_point_to_line(field, beta)))


def normalized_partition(field: DisorderField, beta: float) -> float:
    """W_n = Z_n * exp(-n * lambda(beta)); equals 1 exactly at beta = 0."""
    field.law.check_beta(beta)
    if beta == 0:
        return 1.0
    lam = cumulant(field.law, beta)
    return float(math.exp(log_point_to_line(field, beta) - field.n * lam))


def enumerate_paths(n: int, d: int = 1, cap: int = DEFAULT_PATH_CAP) -> list[PolymerPath]:
    """All (2d)^n nearest-neighbor paths from the origin."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    total = (2 * d) ** n
    if total > cap:
        raise TooManyPaths(f"(2d)^n = {total} exceeds cap {cap}")
    moves = [tuple(s * int(i == j) for j in range(d)) for i in range(d) for s in (1, -1)]
    paths = []
    for choice in product(range(2 * d), repeat=n):
        pos = (0,) * d
        pts = []
        for c in choice:
            pos = tuple(a + b for a, b in zip(pos, moves[c]))
            pts.append(pos)
        paths.append(PolymerPath(tuple(pts)))
    return paths


def hamiltonian(path: PolymerPath, field: DisorderField) -> float:
    """H_n(x) = sum_i omega(i, x_i) along the path."""
    if path.n > field.n:
        raise PathOutsideField(f"path length {path.n} exceeds horizon {field.n}")
    total = 0.0
    for i, x in enumerate(path.steps, start=1):
        total += field.value(i, x)
    return total


# ---------------------------------------------------------------------------
# d = 1 cone layout helpers (parity-packed storage).
#
# At time i the reachable offsets are {-i, -i+2, ..., i}; slot j of a packed
# array of length i+1 holds offset 2j - i.
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cone_layout_1d(n: int) -> tuple[tuple[int, ...], int]:
    """(slice base indices, total sites) for flattened cone storage."""
    base = []
    acc = 0
    for i in range(1, n + 1):
        base.append(acc)
        acc += i + 1
    return tuple(base), acc


@lru_cache(maxsize=None)
def path_offset_matrix(n: int) -> np.ndarray:
    """(2^n, n) int matrix of walk positions; row p encodes the bits of p."""
    if 2**n > DEFAULT_PATH_CAP:
        raise TooManyPaths(f"2^{n} exceeds cap {DEFAULT_PATH_CAP}")
    p = np.arange(2**n, dtype=np.int64)[:, None]
    bits = (p >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return np.cumsum(2 * bits - 1, axis=1).astype(np.int32)


@lru_cache(maxsize=None)
def path_site_indices(n: int) -> np.ndarray:
    """(2^n, n) flat cone-site index of (i, x_i) for every d=1 path."""
    base, _ = cone_layout_1d(n)
    pos = path_offset_matrix(n)
    idx = np.empty_like(pos)
    for i in range(1, n + 1):
        idx[:, i - 1] = base[i - 1] + (pos[:, i - 1] + i) // 2
    return idx


def sample_cone_flat(law: DisorderLaw, n: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    """(batch, sites) i.i.d. draws over the flattened d=1 cone."""
    _, total = cone_layout_1d(n)
    return law.sample(rng, (batch, total))


def log_walk_prob(i: int, offsets) -> np.ndarray:
    """log P(x_i = offset) for the d=1 simple walk; -inf off the support."""
    offsets = np.atleast_1d(np.asarray(offsets, dtype=np.int64))
    out = np.full(offsets.shape, -np.inf)
    ok = (np.abs(offsets) <= i) & ((offsets + i) % 2 == 0)
    k = (offsets[ok] + i) // 2
    out[ok] = gammaln(i + 1) - gammaln(k + 1) - gammaln(i - k + 1) - i * math.log(2.0)
    return out


# ---------------------------------------------------------------------------
# Normalized weight draws: one factor exp(beta*omega - lambda(beta)) per site
# ---------------------------------------------------------------------------

def normalized_weight_sampler(law: DisorderLaw, beta: float):
    """Returns draw(rng, shape) -> exp(beta*omega - lambda) i.i.d. array."""
    law.check_beta(beta)
    lam = cumulant(law, beta)
    if law.kind == BERNOULLI:
        t = math.tanh(beta)

        def draw(rng, shape):
            b = rng.integers(0, 2, size=shape)
            return (1.0 - t) + (2.0 * t) * b

        return draw
    if law.kind == "finite-support":
        table = np.exp(beta * np.asarray(law.values) - lam)
        cum = np.cumsum(law.probs)
        cum[-1] = 1.0

        def draw(rng, shape):
            idx = np.searchsorted(cum, rng.random(shape), side="right")
            return table[idx]

        return draw

    def draw(rng, shape):
        g = rng.standard_normal(shape)
        g *= beta
        g -= lam
        np.exp(g, out=g)
        return g

    return draw


# ---------------------------------------------------------------------------
# Point-to-line replica sweep (d = 1)
#
# U_i(slot) = Z_i(y) e^{-i lambda}; the recursion is a convex neighbor
# average times a fresh normalized weight, and W_n = sum_slots U_n has
# mean exactly 1 over the disorder.
# ---------------------------------------------------------------------------

def _u_sweep(batch: int, n: int, weight_fn) -> np.ndarray:
    u = np.ones((batch, 1))
    for i in range(1, n + 1):
        v = np.zeros((batch, i + 1))
        v[:, 1:] = u
        v[:, :-1] += u
        v *= 0.5
        v *= weight_fn(i)
        u = v
    return u


def run_chunked(total: int, chunk: int, worker, threads: int = 1) -> list:
    """Evaluate worker(chunk_index, size) over fixed-size chunks.

    Chunk boundaries depend only on (total, chunk), never on threads, so
    outputs are bit-identical for any thread count.
    """
    sizes = []
    done = 0
    while done < total:
        sizes.append(min(chunk, total - done))
        done += sizes[-1]
    if threads <= 1 or len(sizes) <= 1:
        return [worker(c, s) for c, s in enumerate(sizes)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        futs = [ex.submit(worker, c, s) for c, s in enumerate(sizes)]
        return [f.result() for f in futs]


def sample_point_to_line_batch(
    law: DisorderLaw,
    beta: float,
    n: int,
    replicas: int,
    seed: int,
    *,
    return_log: bool = False,
    chunk: int = 16384,
    threads: int = 1,
) -> np.ndarray:
    """Replica samples of W_n = Z_n e^{-n lambda}, one fresh field each."""
    draw = normalized_weight_sampler(law, beta)

    def worker(c, size):
        rng = stream(seed, "p2l", c)
        u = _u_sweep(size, n, lambda i: draw(rng, (size, i + 1)))
        w = u.sum(axis=1)
        return np.log(w) if return_log else w

    return np.concatenate(run_chunked(replicas, chunk, worker, threads))


def beta_process_batch(
    law: DisorderLaw,
    n: int,
    beta_grid,
    replicas: int,
    seed: int,
    *,
    chunk: int = 8192,
    threads: int = 1,
) -> np.ndarray:
    """(replicas, len(grid)) matrix of W_n(beta) sharing one field per row."""
    beta_grid = [float(b) for b in beta_grid]
    for b in beta_grid:
        law.check_beta(b)
    lams = [cumulant(law, b) for b in beta_grid]
    base, _ = cone_layout_1d(n)

    def worker(c, size):
        rng = stream(seed, "beta-process", c)
        omega = sample_cone_flat(law, n, size, rng)
        out = np.empty((size, len(beta_grid)))
        for g, (b, lam) in enumerate(zip(beta_grid, lams)):
            if b == 0:
                out[:, g] = 1.0
                continue

            def wfn(i):
                sl = omega[:, base[i - 1] : base[i - 1] + i + 1]
                return np.exp(b * sl - lam)

            out[:, g] = _u_sweep(size, n, wfn).sum(axis=1)
        return out

    return np.concatenate(run_chunked(replicas, chunk, worker, threads))


# ---------------------------------------------------------------------------
# Point-to-point replica sweep with endpoint pruning (d = 1)
#
# V_i(y) = Z_i(y) / E Z_i(y).  The recursion uses the exact walk-probability
# ratios cL + cR = 1, so every V has mean exactly 1 and stays O(1); no logs
# or underflow even at horizons of several thousand.
# ---------------------------------------------------------------------------

def _p2p_windows(n: int, endpoint: int):
    """Per-step parity windows pruned to paths that can still reach endpoint."""
    if abs(endpoint) > n or (endpoint + n) % 2 != 0:
        raise UnreachableEndpoint(f"endpoint {endpoint} unreachable at time {n}")
    lows, widths, coeff_l, coeff_r, shifts = [], [], [], [], []
    prev_low = 0
    for i in range(1, n + 1):
        lo = max(-i, endpoint - (n - i))
        hi = min(i, endpoint + (n - i))
        lo += (lo - i) % 2
        hi -= (hi - i) % 2
        w = (hi - lo) // 2 + 1
        ys = lo + 2 * np.arange(w)
        logp = log_walk_prob(i, ys)
        with np.errstate(divide="ignore"):
            cl = np.exp(log_walk_prob(i - 1, ys - 1) - math.log(2.0) - logp)
            cr = np.exp(log_walk_prob(i - 1, ys + 1) - math.log(2.0) - logp)
        lows.append(lo)
        widths.append(w)
        coeff_l.append(cl)
        coeff_r.append(cr)
        # slot in the padded previous array holding offset (y - 1)
        shifts.append((lo - 1 - prev_low) // 2 + 1)
        prev_low = lo
    return lows, widths, coeff_l, coeff_r, shifts


def _p2p_sweep_numpy(batch: int, n: int, endpoint: int, weight_fn) -> np.ndarray:
    _, widths, coeff_l, coeff_r, shifts = _p2p_windows(n, endpoint)
    v = np.ones((batch, 1))
    for i in range(1, n + 1):
        w = widths[i - 1]
        pad = np.zeros((batch, v.shape[1] + 2))
        pad[:, 1:-1] = v
        s = shifts[i - 1]
        v = coeff_l[i - 1] * pad[:, s : s + w] + coeff_r[i - 1] * pad[:, s + 1 : s + 1 + w]
        v *= weight_fn(i, w)
    return v[:, 0]


def _p2p_sweep_bernoulli(batch: int, n: int, endpoint: int, beta: float, rng) -> np.ndarray:
    """Fused kernel path: weights 1 + omega*tanh(beta) built from raw bytes."""
    from ._kernels import p2p_step_bits

    _, widths, coeff_l, coeff_r, shifts = _p2p_windows(n, endpoint)
    t = math.tanh(beta)
    max_w = max(widths)
    buf_a = np.empty((batch, max_w))
    buf_b = np.empty((batch, max_w))
    buf_a[:, 0] = 1.0
    prev, cur, prev_w = buf_a, buf_b, 1
    for i in range(1, n + 1):
        w = widths[i - 1]
        bits = rng.integers(0, 256, size=(batch, (w + 7) // 8), dtype=np.uint8)
        p2p_step_bits(
            prev, prev_w, cur, w, bits, coeff_l[i - 1], coeff_r[i - 1],
            shifts[i - 1], 1.0 - t, 2.0 * t,
        )
        prev, cur, prev_w = cur, prev, w
    return prev[:, 0].copy()


def sample_point_to_point_batch(
    law: DisorderLaw,
    beta: float,
    n: int,
    endpoint: int,
    replicas: int,
    seed: int,
    *,
    chunk: int = 16384,
    threads: int = 1,
) -> np.ndarray:
    """Replica samples of Z_n(endpoint) / E Z_n(endpoint), mean exactly 1."""
    law.check_beta(beta)
    if law.kind == BERNOULLI and beta != 0:
        def worker(c, size):
            rng = stream(seed, "p2p", c)
            return _p2p_sweep_bernoulli(size, n, endpoint, beta, rng)
    else:
        draw = normalized_weight_sampler(law, beta)

        def worker(c, size):
            rng = stream(seed, "p2p", c)
            return _p2p_sweep_numpy(size, n, endpoint, lambda i, w: draw(rng, (size, w)))

    return np.concatenate(run_chunked(replicas, chunk, worker, threads))
