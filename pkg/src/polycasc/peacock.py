"""The beta-indexed normalized partition process and its martingale twin.

W_n(beta) computed from one shared environment per replica is checked to be
increasing in the convex order along a beta grid.  For the symmetric sign
environment, the site factor identity e^{beta w}/cosh(beta) = 1 + w tanh(beta)
lets the whole process be embedded in a genuine martingale: each site carries
a chain on {-tanh(beta_k), +tanh(beta_k)} advanced by the exact interval-exit
(gambler's ruin) law, which reproduces a Brownian motion evaluated at the
exit times of growing intervals without simulating any paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lattice, orders
from .env import BERNOULLI, DisorderLaw
from .errors import BadSpin, NonIncreasingBeta, TooManyPaths
from .rng import stream


# ---------------------------------------------------------------------------
# Beta process
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaProcessSample:
    """W_n(beta) on a grid, all from one shared disorder realization."""

    beta_grid: tuple[float, ...]
    values: np.ndarray
    field_seed: int

    def __post_init__(self):
        if any(b < 0 for b in self.beta_grid):
            raise ValueError("beta grid must be nonnegative")


def beta_process_sample(law: DisorderLaw, n: int, d: int, beta_grid, seed: int) -> BetaProcessSample:
    """Evaluate W_n at every grid beta on a single sampled field."""
    from .env import sample_field

    grid = tuple(float(b) for b in beta_grid)
    fld = sample_field(law, n, d, seed=seed)
    vals = np.array([lattice.normalized_partition(fld, b) for b in grid])
    return BetaProcessSample(grid, vals, seed)


def bernoulli_factor_identity(omega: int, beta: float) -> tuple[float, float]:
    """(e^{beta w}/cosh beta, 1 + w tanh beta) for a sign variable w."""
    if omega not in (-1, 1):
        raise BadSpin(f"omega must be +/-1, got {omega}")
    lhs = math.exp(beta * omega) / math.cosh(beta)
    rhs = 1.0 + omega * math.tanh(beta)
    return lhs, rhs


@dataclass
class PolymerPeacockReport:
    law_kind: str
    n: int
    beta_grid: list[float]
    replicas: int
    verdicts: list[orders.OrderVerdict]
    mean_z: list[float]
    variance: list[float]
    var_step_z: list[float]
    consistent: bool

    def as_dict(self) -> dict:
        return {
            "law": self.law_kind,
            "n": self.n,
            "beta_grid": self.beta_grid,
            "replicas": self.replicas,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "mean_z": self.mean_z,
            "variance": self.variance,
            "var_step_z": self.var_step_z,
            "consistent": self.consistent,
        }


def peacock_check_polymer(
    law: DisorderLaw,
    n: int,
    d: int,
    beta_grid,
    replicas: int,
    strikes: orders.TestGrid | None = None,
    alpha: float = orders.DEFAULT_ALPHA,
    seed: int = 0,
    threads: int = 1,
) -> PolymerPeacockReport:
    """Adjacent-pair convex-order checks of W_n(beta) plus variance growth."""
    from .spinglass import variance_step_z

    grid = [float(b) for b in beta_grid]
    if any(b < 0 for b in grid) or any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be nonnegative and strictly increasing")
    if d != 1:
        raise ValueError("replica sweeps are implemented for d = 1")
    w = lattice.beta_process_batch(law, n, grid, replicas, seed, threads=threads)
    verdicts = []
    var_z = []
    for g in range(len(grid) - 1):
        x = orders.SampleBatch(w[:, g], label=f"W(beta={grid[g]:g})")
        y = orders.SampleBatch(w[:, g + 1], label=f"W(beta={grid[g+1]:g})")
        verdicts.append(orders.cx_compare(x, y, strikes=strikes, alpha=alpha, paired=True))
        var_z.append(variance_step_z(w, g))
    mean_z = []
    for g in range(len(grid)):
        se = w[:, g].std(ddof=1) / math.sqrt(replicas)
        mean_z.append(float((w[:, g].mean() - 1.0) / se) if se > 0 else 0.0)
    from scipy.stats import norm

    zc = norm.ppf(1 - alpha)
    consistent = all(v.outcome != orders.VIOLATED for v in verdicts) and all(
        z > -zc for z in var_z
    )
    return PolymerPeacockReport(
        law.kind, n, grid, replicas, verdicts, mean_z,
        [float(w[:, g].var(ddof=1)) for g in range(len(grid))], var_z,
        bool(consistent),
    )


# ---------------------------------------------------------------------------
# Interval-exit chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExitChainState:
    """Brownian value at the exit time of [-tanh(beta_k), +tanh(beta_k)]."""

    level_index: int
    beta: float
    value: float

    def __post_init__(self):
        if abs(abs(self.value) - math.tanh(self.beta)) > 1e-12 and self.beta > 0:
            raise ValueError("|value| must equal tanh(beta) exactly")


def exit_chain_step(state: ExitChainState, beta_next: float, rng: np.random.Generator) -> ExitChainState:
    """Advance to the exit of the wider interval [-tanh(b'), tanh(b')].

    Started at v inside the interval, the walk exits at +tanh(b') with
    probability (v + tanh b')/(2 tanh b'), which makes the chain a
    martingale with uniform marginals on the two endpoints.
    """
    if beta_next <= state.beta:
        raise NonIncreasingBeta(f"beta must increase: {state.beta} -> {beta_next}")
    t = math.tanh(beta_next)
    p_up = (state.value + t) / (2 * t)
    up = rng.random() < p_up
    return ExitChainState(state.level_index + 1, beta_next, t if up else -t)


def exit_chain_matrix(beta_grid, shape, rng: np.random.Generator) -> np.ndarray:
    """(levels, *shape) array of coupled chain values, one chain per cell."""
    grid = [float(b) for b in beta_grid]
    if any(b <= 0 for b in grid) or any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise NonIncreasingBeta("grid must be strictly increasing and positive")
    out = np.empty((len(grid),) + tuple(shape))
    v = np.zeros(shape)
    for k, b in enumerate(grid):
        t = math.tanh(b)
        p_up = (v + t) / (2 * t)
        up = rng.random(shape) < p_up
        v = np.where(up, t, -t)
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# Martingale process
# ---------------------------------------------------------------------------

def product_walk_average(factors: np.ndarray, n: int) -> np.ndarray:
    """mean over d=1 paths of prod_i factors(i, x_i); factors is a flat-cone
    matrix (batch, sites) in the layout of lattice.cone_layout_1d."""
    base, total = lattice.cone_layout_1d(n)
    if factors.shape[1] != total:
        raise ValueError("factor matrix does not match the cone layout")

    def wfn(i):
        return factors[:, base[i - 1] : base[i - 1] + i + 1]

    return lattice._u_sweep(factors.shape[0], n, wfn).sum(axis=1)


def martingale_process_batch(
    n: int,
    beta_grid,
    replicas: int,
    seed: int,
    *,
    d: int = 1,
    cap: int = lattice.DEFAULT_PATH_CAP,
    chunk: int = 8192,
) -> np.ndarray:
    """(replicas, grid) samples of M_n(beta): the walk average of site
    factors (1 + chain value), all grid levels coupled through the chains."""
    if d != 1:
        raise ValueError("martingale sampling is implemented for d = 1")
    if (2 * d) ** n > cap:
        raise TooManyPaths(f"(2d)^n exceeds cap {cap}")
    grid = [float(b) for b in beta_grid]
    _, total = lattice.cone_layout_1d(n)

    def worker(c, size):
        rng = stream(seed, "exit-chains", c)
        chains = exit_chain_matrix(grid, (size, total), rng)
        out = np.empty((size, len(grid)))
        for k in range(len(grid)):
            out[:, k] = product_walk_average(1.0 + chains[k], n)
        return out

    return np.concatenate(lattice.run_chunked(replicas, chunk, worker))


def martingale_process_sample(n: int, d: int, beta_grid, seed: int) -> np.ndarray:
    """One coupled draw of M_n(beta) along the grid."""
    return martingale_process_batch(n, beta_grid, 1, seed, d=d)[0]


def w_bernoulli_batch(n: int, beta_grid, replicas: int, seed: int) -> np.ndarray:
    """(replicas, grid) of W_n(beta) for the sign environment, same transfer
    as the martingale but with factors 1 + omega*tanh(beta)."""
    law = DisorderLaw.bernoulli()
    return lattice.beta_process_batch(law, n, [float(b) for b in beta_grid], replicas, seed)


def binned_slope(m1: np.ndarray, m2: np.ndarray, bins: int = 10) -> tuple[float, float]:
    """Weighted least-squares slope of binned conditional means.

    Bins m1 by quantiles, regresses the per-bin mean of m2 on the per-bin
    mean of m1 with bin counts as weights; returns (slope, stderr).  For a
    martingale the slope is 1.
    """
    edges = np.quantile(m1, np.linspace(0, 1, bins + 1))
    edges[0] -= 1e-9
    idx = np.clip(np.searchsorted(edges, m1, side="right") - 1, 0, bins - 1)
    xs, ys, ws, vs = [], [], [], []
    for b in range(bins):
        mask = idx == b
        cnt = int(mask.sum())
        if cnt < 2:
            continue
        xs.append(m1[mask].mean())
        ys.append(m2[mask].mean())
        ws.append(cnt)
        vs.append(m2[mask].var(ddof=1) / cnt)
    xs = np.array(xs)
    ys = np.array(ys)
    ws = np.array(ws, dtype=float)
    xbar = np.average(xs, weights=ws)
    sxx = np.sum(ws * (xs - xbar) ** 2)
    slope = float(np.sum(ws * (xs - xbar) * ys) / sxx)
    # variance of the WLS slope from the per-bin sampling variances
    var = float(np.sum((ws * (xs - xbar)) ** 2 * np.array(vs)) / sxx**2)
    return slope, math.sqrt(var)
