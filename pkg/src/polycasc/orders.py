"""Statistical verification engine for stochastic-order claims.

Every comparison takes two sample batches and a claim "X is dominated by Y"
in one of three orders (usual, convex, Laplace transform), evaluates the
defining inequality on a finite grid, and returns a three-state verdict:
VIOLATED if some grid point contradicts the claim beyond the z threshold,
INCONCLUSIVE if no point has any statistical power, CONSISTENT otherwise.
The per-point z is oriented so that positive values support the claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import NegativeValues, NonPositiveValues
from .rng import stream

CONSISTENT = "CONSISTENT"
VIOLATED = "VIOLATED"
INCONCLUSIVE = "INCONCLUSIVE"

DEFAULT_ALPHA = 1.0 - norm.cdf(3.0)  # one-sided threshold at z = 3
QUANTILE_PERCENTS = (1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50,
                     55, 60, 65, 70, 75, 80, 85, 90, 95, 99)


@dataclass
class SampleBatch:
    """Replicate values of a scalar observable.

    ``clusters`` marks groups of mutually dependent samples (population
    pools resample ancestors, so samples within one pool are correlated);
    when present, standard errors are computed cluster-robustly.
    """

    values: np.ndarray
    label: str = ""
    seed_lineage: str = ""
    clusters: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("empty sample batch")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample batch contains non-finite values")
        self.values = v
        if self.clusters is not None:
            c = np.asarray(self.clusters).ravel()
            if c.size != v.size:
                raise ValueError("clusters must align with values")
            self.clusters = c

    @property
    def count(self) -> int:
        return int(self.values.size)


def mean_se(values: np.ndarray, clusters: np.ndarray | None = None) -> tuple[float, float]:
    """Mean and its standard error, cluster-robust when labels are given."""
    m = float(values.mean())
    if values.size < 2:
        return m, 0.0
    if clusters is None or np.unique(clusters).size < 2:
        return m, float(values.std(ddof=1) / math.sqrt(values.size))
    dev = values - m
    var = 0.0
    for g in np.unique(clusters):
        s = float(dev[clusters == g].sum())
        var += s * s
    return m, math.sqrt(var) / values.size


@dataclass(frozen=True)
class TestGrid:
    """Sorted evaluation grid; lambda grids must be strictly positive."""

    kind: str  # "lambda", "strike", or "cdf"
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid must be a nonempty 1-d array")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if self.kind == "lambda" and pts[0] <= 0:
            raise ValueError("lambda grid must be strictly positive")
        object.__setattr__(self, "points", pts)

    @classmethod
    def lambda_grid(cls, lo: float = 1e-2, hi: float = 1e2, num: int = 21) -> "TestGrid":
        return cls("lambda", np.logspace(math.log10(lo), math.log10(hi), num))

    @classmethod
    def from_quantiles(cls, pooled, kind: str = "strike") -> "TestGrid":
        pts = np.unique(np.percentile(np.asarray(pooled, dtype=float), QUANTILE_PERCENTS))
        if pts.size < 2:
            pts = np.array([pts[0] - 0.5, pts[0] + 0.5]) if pts.size else np.array([0.0, 1.0])
        return cls(kind, pts)


@dataclass(frozen=True)
class GridPointStat:
    t: float
    lhs: float  # X-side estimate
    rhs: float  # Y-side estimate
    se: float
    z: float    # positive supports the claim
    transform: str = ""


@dataclass
class OrderVerdict:
    order: str
    direction: str
    alpha: float
    points: list[GridPointStat]
    outcome: str
    mean_z: float | None = None
    crossing: dict | None = None
    notes: str = ""

    @property
    def violated_points(self) -> list[GridPointStat]:
        zc = norm.ppf(1 - self.alpha)
        return [p for p in self.points if (p.se > 0 or p.z != 0) and p.z < -zc]

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "direction": self.direction,
            "alpha": self.alpha,
            "outcome": self.outcome,
            "mean_z": self.mean_z,
            "crossing": self.crossing,
            "notes": self.notes,
            "points": [
                {"t": p.t, "lhs": p.lhs, "rhs": p.rhs, "se": p.se, "z": p.z,
                 "transform": p.transform}
                for p in self.points
            ],
        }

    def to_csv_rows(self) -> list[list]:
        return [
            [self.order, p.transform, p.t, p.lhs, p.rhs, p.se, p.z, self.outcome]
            for p in self.points
        ]


def _z_score(diff: float, se: float) -> float:
    """z with the exact-evidence convention: a nonzero difference at zero
    standard error is certain, not powerless."""
    if se > 0:
        return diff / se
    if diff == 0:
        return 0.0
    return math.copysign(math.inf, diff)


def _decide(points: list[GridPointStat], alpha: float, extra_violated: bool = False) -> str:
    zc = norm.ppf(1 - alpha)
    zs = [p.z for p in points if p.se > 0 or p.z != 0]
    if extra_violated or any(z < -zc for z in zs):
        return VIOLATED
    if not zs or max(abs(z) for z in zs) < 1.0:
        return INCONCLUSIVE
    return CONSISTENT


def _diff_stat(
    a: np.ndarray,
    b: np.ndarray,
    paired: bool,
    ca: np.ndarray | None = None,
    cb: np.ndarray | None = None,
) -> tuple[float, float]:
    """(mean(a) - mean(b), standard error of the difference)."""
    if paired:
        if a.size != b.size:
            raise ValueError("paired comparison needs equal batch sizes")
        d, se = mean_se(a - b, ca)
        return d, se
    ma, sa = mean_se(a, ca)
    mb, sb = mean_se(b, cb)
    return ma - mb, math.sqrt(sa * sa + sb * sb)


def _direction(x: SampleBatch, y: SampleBatch, order: str) -> str:
    return f"{x.label or 'X'} <=_{order} {y.label or 'Y'}"


# ---------------------------------------------------------------------------
# Laplace transform order
# ---------------------------------------------------------------------------

def lt_compare(
    x: SampleBatch,
    y: SampleBatch,
    grid: TestGrid | None = None,
    alpha: float = DEFAULT_ALPHA,
    paired: bool = False,
) -> OrderVerdict:
    """Check E exp(-lam X) >= E exp(-lam Y) on the lambda grid.

    The claim is X dominated by Y: for every lam >= 0 the X-side transform
    must be at least the Y-side one.
    """
    if x.values.min() < 0 or y.values.min() < 0:
        raise NegativeValues("Laplace-order comparison needs nonnegative values")
    if grid is None:
        grid = TestGrid.lambda_grid()
    pts = []
    for lam in grid.points:
        a = np.exp(-lam * x.values)
        b = np.exp(-lam * y.values)
        diff, se = _diff_stat(a, b, paired, x.clusters, y.clusters)
        z = _z_score(diff, se)
        pts.append(GridPointStat(float(lam), float(a.mean()), float(b.mean()),
                                 se, z, "laplace"))
    return OrderVerdict("lt", _direction(x, y, "Lt"), alpha, pts, _decide(pts, alpha))


def lt_compare_randomized(
    x: SampleBatch,
    y: SampleBatch,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    grid: TestGrid | None = None,
) -> OrderVerdict:
    """Cross-validation of lt_compare via the exponential-ratio identity:
    X/eps <=_st Y/eps' with independent unit exponentials."""
    if x.values.min() < 0 or y.values.min() < 0:
        raise NegativeValues("Laplace-order comparison needs nonnegative values")
    ex = stream(seed, "lt-randomized", 0).standard_exponential(x.count)
    ey = stream(seed, "lt-randomized", 1).standard_exponential(y.count)
    rx = SampleBatch(x.values / ex, label=x.label or "X")
    ry = SampleBatch(y.values / ey, label=y.label or "Y")
    verdict = st_compare(rx, ry, grid=grid, alpha=alpha)
    verdict.order = "lt-randomized"
    verdict.direction = _direction(x, y, "Lt")
    verdict.notes = "st comparison of exponential ratios"
    return verdict


# ---------------------------------------------------------------------------
# Usual stochastic order
# ---------------------------------------------------------------------------

def _ecdf(values_sorted: np.ndarray, t: float) -> float:
    return float(np.searchsorted(values_sorted, t, side="right")) / values_sorted.size


def st_compare(
    x: SampleBatch,
    y: SampleBatch,
    grid: TestGrid | None = None,
    alpha: float = DEFAULT_ALPHA,
) -> OrderVerdict:
    """Check F_X(t) >= F_Y(t) on the grid; also reports crossing evidence
    (grid points significant in both directions)."""
    if grid is None:
        grid = TestGrid.from_quantiles(np.concatenate([x.values, y.values]), "cdf")
    xs = np.sort(x.values)
    ys = np.sort(y.values)
    pts = []
    for t in grid.points:
        fx = _ecdf(xs, t)
        fy = _ecdf(ys, t)
        if x.clusters is None and y.clusters is None:
            se = math.sqrt(fx * (1 - fx) / xs.size + fy * (1 - fy) / ys.size)
        else:
            _, sx = mean_se((x.values <= t).astype(float), x.clusters)
            _, sy = mean_se((y.values <= t).astype(float), y.clusters)
            se = math.sqrt(sx * sx + sy * sy)
        z = _z_score(fx - fy, se)
        pts.append(GridPointStat(float(t), fx, fy, se, z, "cdf"))
    zc = norm.ppf(1 - alpha)
    neg = [p for p in pts if (p.se > 0 or p.z != 0) and p.z < -zc]
    pos = [p for p in pts if (p.se > 0 or p.z != 0) and p.z > zc]
    crossing = None
    if neg and pos:
        lo = min(neg, key=lambda p: p.z)
        hi = max(pos, key=lambda p: p.z)
        crossing = {"against": {"t": lo.t, "z": lo.z}, "for": {"t": hi.t, "z": hi.z}}
    verdict = OrderVerdict("st", _direction(x, y, "st"), alpha, pts,
                           _decide(pts, alpha), crossing=crossing)
    return verdict


# ---------------------------------------------------------------------------
# Convex order
# ---------------------------------------------------------------------------

def cx_compare(
    x: SampleBatch,
    y: SampleBatch,
    strikes: TestGrid | None = None,
    alpha: float = DEFAULT_ALPHA,
    paired: bool = False,
) -> OrderVerdict:
    """Check both put and call transforms at every strike plus mean equality.

    X <=_cx Y requires E(d-X)+ <= E(d-Y)+ and E(X-d)+ <= E(Y-d)+ for all d,
    and equal means; a significant mean difference is itself a violation.
    """
    if strikes is None:
        strikes = TestGrid.from_quantiles(np.concatenate([x.values, y.values]))
    pts = []
    for d in strikes.points:
        for name, tx, ty in (
            ("put", np.maximum(d - x.values, 0.0), np.maximum(d - y.values, 0.0)),
            ("call", np.maximum(x.values - d, 0.0), np.maximum(y.values - d, 0.0)),
        ):
            diff, se = _diff_stat(ty, tx, paired, y.clusters, x.clusters)  # claim: Y side >= X side
            z = _z_score(diff, se)
            pts.append(GridPointStat(float(d), float(tx.mean()), float(ty.mean()),
                                     se, z, name))
    mdiff, mse = _diff_stat(x.values, y.values, paired, x.clusters, y.clusters)
    mean_z = _z_score(mdiff, mse)
    zc = norm.ppf(1 - alpha)
    outcome = _decide(pts, alpha, extra_violated=abs(mean_z) > zc)
    return OrderVerdict("cx", _direction(x, y, "cx"), alpha, pts, outcome,
                        mean_z=mean_z)


# ---------------------------------------------------------------------------
# Derived functionals and their comparison
# ---------------------------------------------------------------------------

@dataclass
class FunctionalRow:
    name: str
    estimate: float
    stderr: float


def derived_functionals(x: SampleBatch, alphas=(0.25, 0.5, 0.75)) -> list[FunctionalRow]:
    """E log X, E X^a for each a, and E X log X, with standard errors."""
    v = x.values
    if v.min() <= 0:
        raise NonPositiveValues("log and power functionals need positive values")
    rows = []

    def add(name, arr):
        rows.append(FunctionalRow(name, float(arr.mean()),
                                  float(arr.std(ddof=1) / math.sqrt(arr.size))))

    add("log", np.log(v))
    for a in alphas:
        add(f"pow_{a:g}", v**a)
    add("xlogx", v * np.log(v))
    return rows


def functional_compare(
    x: SampleBatch, y: SampleBatch, alphas=(0.25, 0.5, 0.75),
    alpha: float = DEFAULT_ALPHA, paired: bool = False,
) -> list[dict]:
    """z-tests for the functional inequalities implied by Lt domination:
    E log and E X^a increase from X to Y, while E[X log X] decreases."""
    rows = []
    fx = derived_functionals(x, alphas)
    fy = derived_functionals(y, alphas)
    vx, vy = x.values, y.values
    arrays = {"log": (np.log(vx), np.log(vy)), "xlogx": (vx * np.log(vx), vy * np.log(vy))}
    for a in alphas:
        arrays[f"pow_{a:g}"] = (vx**a, vy**a)
    zc = norm.ppf(1 - alpha)
    for rx, ry in zip(fx, fy):
        ax, ay = arrays[rx.name]
        reversed_dir = rx.name == "xlogx"
        if reversed_dir:
            diff, se = _diff_stat(ax, ay, paired)  # claim X side >= Y side
        else:
            diff, se = _diff_stat(ay, ax, paired)  # claim Y side >= X side
        z = diff / se if se > 0 else 0.0
        rows.append({
            "functional": rx.name,
            "claim": "X >= Y" if reversed_dir else "X <= Y",
            "lhs": rx.estimate,
            "rhs": ry.estimate,
            "se": se,
            "z": z,
            "violated": bool(se > 0 and z < -zc),
        })
    return rows


# ---------------------------------------------------------------------------
# Association
# ---------------------------------------------------------------------------

def association_check(
    family_sampler,
    replicas: int,
    seed: int,
    lambdas=None,
    functions=None,
    alpha: float = DEFAULT_ALPHA,
) -> OrderVerdict:
    """Check E[prod f_i(X_i)] >= prod E[f_i(X_i)] for an associated family.

    The default family is f_i(x) = exp(-lam x), nonincreasing and
    nonnegative as the association inequality requires; the standard error
    comes from the delta method on the joint moment vector.
    """
    matrix = np.asarray(family_sampler(replicas, seed), dtype=float)
    if matrix.ndim != 2:
        raise ValueError("family sampler must return a (replicas, k) matrix")
    k = matrix.shape[1]
    if lambdas is None and functions is None:
        lambdas = np.logspace(-1, 1, 5)
    cases = []
    if functions is not None:
        cases.append((float("nan"), functions))
    else:
        for lam in lambdas:
            lam = float(lam)
            cases.append((lam, [lambda v, l=lam: np.exp(-l * v)] * k))
    pts = []
    for lam, funcs in cases:
        f = np.column_stack([funcs[i](matrix[:, i]) for i in range(k)])
        if f.min() < 0:
            raise NegativeValues("association inequality needs nonnegative functions")
        prod = f.prod(axis=1)
        m0 = prod.mean()
        mi = f.mean(axis=0)
        joint = np.column_stack([prod, f])
        cov = np.cov(joint, rowvar=False)
        grad = np.empty(k + 1)
        grad[0] = 1.0
        for i in range(k):
            grad[i + 1] = -np.prod(np.delete(mi, i))
        var = float(grad @ cov @ grad) / matrix.shape[0]
        se = math.sqrt(max(var, 0.0))
        diff = float(m0 - mi.prod())
        z = _z_score(diff, se)
        pts.append(GridPointStat(lam, float(m0), float(mi.prod()), se, z, "assoc"))
    direction = "E prod f_i >= prod E f_i"
    return OrderVerdict("association", direction, alpha, pts, _decide(pts, alpha))
