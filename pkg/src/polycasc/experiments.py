"""Experiment assembly: bind samplers to order checks and emit reports.

These functions are what the command line runs; the acceptance suite calls
them directly so that both paths exercise identical code."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import cascade, gaussian, lattice, oracle, orders, peacock, scaling, spinglass
from .env import DisorderLaw, cumulant
from .reporting import ExperimentReport, StopWatch, verdict_table
from .rng import RngPolicy

LAW_NAMES = {
    "gaussian": DisorderLaw.gaussian,
    "bernoulli": DisorderLaw.bernoulli,
}


def resolve_law(name: str) -> DisorderLaw:
    if name in LAW_NAMES:
        return LAW_NAMES[name]()
    p = Path(name)
    if p.exists():
        return DisorderLaw.from_json(p.read_text())
    raise ValueError(f"unknown law {name!r} (use gaussian, bernoulli, or a JSON file)")


def _batch_sampler(side: str, law, beta, n, m, replicas, seed, threads, exact_fam_cap=2000):
    """Normalized point-to-line batch for one comparison side."""
    if side == "polymer":
        vals = lattice.sample_point_to_line_batch(
            law, beta, n, replicas, seed, threads=threads
        )
        return orders.SampleBatch(vals, label=f"polymer n={n}",
                                  seed_lineage=f"seed={seed}/p2l")
    if side == "mtree":
        if m is None or n % m:
            raise ValueError("mtree side needs a block length dividing n")
        levels = n // m
        wlaw = cascade.CascadeWeightLaw(cascade.Alphabet.build(m, 1), beta, law, mean_one=True)
        n_letters = wlaw.alphabet.size
        fams = (n_letters**levels - 1) // (n_letters - 1)
        if fams <= exact_fam_cap:
            vals = cascade.sample_cascade_batch(wlaw, levels, replicas, seed)
            lineage = f"seed={seed}/cascade-exact"
        else:
            vals = cascade.sample_mtree_pool(wlaw, levels, replicas, seed).samples
            lineage = f"seed={seed}/cascade-pool"
        return orders.SampleBatch(vals, label=f"mtree n={n} m={m}", seed_lineage=lineage)
    raise ValueError(f"unknown comparison side {side!r}")


def order_check(
    claim: str,
    x_side: str,
    y_side: str,
    law_name: str,
    n: int,
    m: int | None,
    beta: float,
    replicas: int,
    alpha: float = orders.DEFAULT_ALPHA,
    seed: int = 0,
    threads: int = 1,
    engine: str = "mc",
    lambdas=None,
) -> ExperimentReport:
    """Claimed x <=_claim y between polymer and block-tree partition batches."""
    law = resolve_law(law_name)
    config = {
        "claim": claim, "x": x_side, "y": y_side, "law": law_name, "n": n,
        "m": m, "beta": beta, "replicas": replicas, "alpha": alpha,
        "engine": engine, "threads": threads,
    }
    report = ExperimentReport("order-check", config, seed)
    with StopWatch() as sw:
        if engine == "oracle":
            grid = lambdas if lambdas is not None else orders.TestGrid.lambda_grid().points
            cert = oracle.exact_lt_certificate(law, n, m, beta, grid)
            forward = x_side == "polymer"
            margins = cert.margins if forward else -cert.margins
            outcome = orders.CONSISTENT if np.all(margins >= 0) else orders.VIOLATED
            verdict = {
                "order": "lt",
                "direction": f"{x_side} <=_Lt {y_side} (exact)",
                "alpha": 0.0,
                "outcome": outcome,
                "points": [
                    {"t": float(l), "lhs": float(p if forward else t),
                     "rhs": float(t if forward else p),
                     "se": 0.0, "z": float("inf") if mg > 0 else (0.0 if mg == 0 else float("-inf")),
                     "transform": "laplace"}
                    for l, p, t, mg in zip(cert.lambdas, cert.polymer, cert.tree, margins)
                ],
            }
            report.verdicts.append(verdict)
            report.metrics["certificate"] = cert.as_dict()
            header = ["lambda", "x_side", "y_side", "margin", "exact"]
            rows = [[float(l), float(p if forward else t), float(t if forward else p),
                     float(mg), True]
                    for l, p, t, mg in zip(cert.lambdas, cert.polymer, cert.tree, margins)]
            report.tables["margins"] = (header, rows)
        else:
            policy = RngPolicy(seed)
            xb = _batch_sampler(x_side, law, beta, n, m, replicas,
                                policy.subseed("x", x_side), threads)
            yb = _batch_sampler(y_side, law, beta, n, m, replicas,
                                policy.subseed("y", y_side), threads)
            grid = orders.TestGrid("lambda", lambdas) if lambdas is not None else None
            if claim == "lt":
                verdict = orders.lt_compare(xb, yb, grid=grid, alpha=alpha)
            elif claim == "st":
                verdict = orders.st_compare(xb, yb, alpha=alpha)
            elif claim == "cx":
                verdict = orders.cx_compare(xb, yb, alpha=alpha)
            else:
                raise ValueError(f"unknown claim {claim!r}")
            report.verdicts.append(verdict.to_dict())
            report.tables["points"] = verdict_table([verdict])
            report.metrics["x_mean"] = float(xb.values.mean())
            report.metrics["y_mean"] = float(yb.values.mean())
            report.metrics["x_se"] = float(xb.values.std(ddof=1) / math.sqrt(xb.count))
            report.metrics["y_se"] = float(yb.values.std(ddof=1) / math.sqrt(yb.count))
            report.seed_lineage = f"{xb.seed_lineage};{yb.seed_lineage}"
            pts = verdict.points
            report.plots.append((
                "curves",
                [(f"x:{xb.label}", [p.t for p in pts], [p.lhs for p in pts]),
                 (f"y:{yb.label}", [p.t for p in pts], [p.rhs for p in pts])],
                f"{claim} comparison", "grid point", "estimate", claim == "lt",
            ))
            if claim == "lt":
                fc = orders.functional_compare(xb, yb, alpha=alpha)
                header = ["functional", "claim", "x_est", "y_est", "se", "z", "violated"]
                rows = [[r["functional"], r["claim"], r["lhs"], r["rhs"], r["se"],
                         r["z"], r["violated"]] for r in fc]
                report.tables["functionals"] = (header, rows)
    report.wall_time_s = sw.elapsed
    return report


def block_family_sampler(law: DisorderLaw, beta: float, k: int, m: int):
    """Sampler of the block partition family (Z^x over one block, x in
    L_{(k-1)m}), all sharing a single environment on the block's time window.

    Under the product disorder measure these are nondecreasing functions of
    independent variables, hence an associated family.
    """
    if k < 2:
        raise ValueError("need k >= 2 so the family has a previous boundary")
    start_offsets = np.arange(-(k - 1) * m, (k - 1) * m + 1, 2)
    t0 = (k - 1) * m
    # flat layout of the window slices t0+1 .. t0+m over full parity windows
    widths = [(t0 + j) + 1 for j in range(1, m + 1)]
    bases = np.concatenate([[0], np.cumsum(widths[:-1])]).astype(int)
    total = int(sum(widths))
    moves = lattice.path_offset_matrix(m)  # (2^m, m) relative displacements

    def sampler(replicas: int, seed: int) -> np.ndarray:
        from .rng import stream

        rng = stream(seed, "block-family")
        draws = law.sample(rng, (replicas, total))
        out = np.zeros((replicas, start_offsets.size))
        for s, x in enumerate(start_offsets):
            h = np.zeros((replicas, moves.shape[0]))
            for j in range(1, m + 1):
                t = t0 + j
                off = x + moves[:, j - 1]
                idx = bases[j - 1] + (off + t) // 2
                h += draws[:, idx]
            out[:, s] = np.exp(beta * h).mean(axis=1)
        return out

    return sampler


def association_experiment(
    law_name: str, k: int, m: int, beta: float, replicas: int,
    lambdas=None, alpha: float = orders.DEFAULT_ALPHA, seed: int = 0,
) -> ExperimentReport:
    """Product-vs-marginals inequality for the shared-field block family."""
    law = resolve_law(law_name)
    config = {"law": law_name, "k": k, "m": m, "beta": beta,
              "replicas": replicas, "alpha": alpha}
    report = ExperimentReport("association", config, seed)
    with StopWatch() as sw:
        sampler = block_family_sampler(law, beta, k, m)
        verdict = orders.association_check(sampler, replicas, seed,
                                           lambdas=lambdas, alpha=alpha)
        report.verdicts.append(verdict.to_dict())
        report.tables["points"] = verdict_table([verdict])
    report.wall_time_s = sw.elapsed
    return report


def _peacock_tables(rep) -> dict:
    tables = {}
    pair_rows = []
    for g, v in enumerate(rep.verdicts):
        for row in v.to_csv_rows():
            pair_rows.append([g] + row)
    tables["pairs"] = (["pair_index"] + ["order", "transform", "t", "lhs", "rhs", "se", "z", "outcome"], pair_rows)
    summary = []
    for g in range(len(rep.beta_grid)):
        summary.append([rep.beta_grid[g], rep.mean_z[g], rep.variance[g],
                        rep.var_step_z[g] if g < len(rep.var_step_z) else ""])
    tables["summary"] = (["beta", "mean_z", "variance", "var_step_z"], summary)
    return tables


def peacock_experiment(
    env_name: str, n: int, beta_grid, replicas: int,
    checks=("cx",), alpha: float = orders.DEFAULT_ALPHA, seed: int = 0,
    threads: int = 1, d: int = 1,
) -> ExperimentReport:
    """Polymer peacock checks; optional martingale-embedding validation."""
    law = resolve_law(env_name)
    grid = [float(b) for b in beta_grid]
    config = {"env": env_name, "n": n, "beta_grid": grid, "replicas": replicas,
              "alpha": alpha, "checks": list(checks), "threads": threads}
    report = ExperimentReport("peacock", config, seed)
    with StopWatch() as sw:
        if "cx" in checks:
            rep = peacock.peacock_check_polymer(
                law, n, d, grid, replicas, alpha=alpha, seed=seed, threads=threads
            )
            report.verdicts.extend(v.to_dict() for v in rep.verdicts)
            report.metrics["peacock"] = {
                "mean_z": rep.mean_z, "variance": rep.variance,
                "var_step_z": rep.var_step_z, "consistent": rep.consistent,
            }
            report.tables.update(_peacock_tables(rep))
        if "martingale" in checks or "marginals" in checks:
            pos_grid = [b for b in grid if b > 0]
            mart = peacock.martingale_process_batch(n, pos_grid, replicas, seed)
            wvals = peacock.w_bernoulli_batch(n, pos_grid, replicas,
                                              RngPolicy(seed).subseed("w-side"))
            rows = []
            from scipy.stats import ks_2samp

            ok = True
            for g, b in enumerate(pos_grid):
                ks = ks_2samp(mart[:, g], wvals[:, g])
                rows.append([b, float(mart[:, g].mean()), float(wvals[:, g].mean()),
                             float(ks.statistic), float(ks.pvalue)])
                if ks.pvalue < 0.01:
                    ok = False
            report.tables["marginals"] = (
                ["beta", "martingale_mean", "w_mean", "ks_stat", "ks_pvalue"], rows)
            slopes = []
            for g in range(len(pos_grid) - 1):
                slope, se = peacock.binned_slope(mart[:, g], mart[:, g + 1])
                z = (slope - 1.0) / se if se > 0 else 0.0
                slopes.append([pos_grid[g], pos_grid[g + 1], slope, se, z])
            report.tables["martingale_slopes"] = (
                ["beta_lo", "beta_hi", "slope", "se", "z_vs_1"], slopes)
            report.metrics["marginals_ok"] = ok
    report.wall_time_s = sw.elapsed
    return report


def spinglass_experiment(
    model: str, n_spins: int, side: int, j: float, beta_grid, replicas: int,
    alpha: float = orders.DEFAULT_ALPHA, seed: int = 0,
) -> ExperimentReport:
    if model == "sk":
        spec = spinglass.SpinModelSpec.sk(n_spins)
    elif model == "ea":
        spec = spinglass.SpinModelSpec.ea(side)
    elif model == "rfim":
        spec = spinglass.SpinModelSpec.rfim(side, j)
    else:
        raise ValueError(f"unknown spin model {model!r}")
    grid = [float(b) for b in beta_grid]
    config = {"model": model, "n_spins": spec.n_spins, "side": side, "j": j,
              "beta_grid": grid, "replicas": replicas, "alpha": alpha}
    report = ExperimentReport("spinglass", config, seed)
    with StopWatch() as sw:
        rep = spinglass.peacock_check_spin(spec, grid, replicas, alpha=alpha, seed=seed)
        report.verdicts.extend(v.to_dict() for v in rep.verdicts)
        report.metrics["peacock"] = {
            "mean_z": rep.mean_z, "variance": rep.variance,
            "var_step_z": rep.var_step_z, "consistent": rep.consistent,
        }
        report.tables.update(_peacock_tables(rep))
    report.wall_time_s = sw.elapsed
    return report


def gaussian_cov_experiment(
    n: int, m: int, checks=("slepian",), beta: float = 1.0,
    replicas: int = 10**5, alpha: float = orders.DEFAULT_ALPHA, seed: int = 0,
) -> ExperimentReport:
    config = {"n": n, "m": m, "checks": list(checks), "beta": beta,
              "replicas": replicas, "alpha": alpha}
    report = ExperimentReport("gaussian-cov", config, seed)
    with StopWatch() as sw:
        if "slepian" in checks:
            rep = gaussian.slepian_precondition(n, m)
            report.metrics["slepian"] = rep.as_dict()
            pair = gaussian.covariance_pair(n, m)
            report.tables["covariance"] = (
                ["path_a", "path_b", "lattice_cov", "tree_cov"], pair.to_csv_rows())
            if not rep.holds:
                report.verdicts.append({
                    "order": "covariance", "direction": "tree <= lattice entrywise",
                    "alpha": 0.0, "outcome": orders.VIOLATED, "points": [],
                })
        if "max" in checks:
            verdict = gaussian.max_compare(n, m, replicas=replicas, alpha=alpha, seed=seed)
            report.verdicts.append(verdict.to_dict())
            report.tables["max_points"] = verdict_table([verdict])
        if "elogz" in checks:
            rep2 = gaussian.elogz_compare(n, m, replicas=replicas, beta=beta,
                                          alpha=alpha, seed=seed)
            report.metrics["elogz"] = rep2.as_dict()
            if not rep2.consistent:
                report.verdicts.append({
                    "order": "elogz", "direction": "E log Z lattice <= tree",
                    "alpha": alpha, "outcome": orders.VIOLATED, "points": [],
                })
        if "stfail" in checks:
            rep3 = gaussian.st_failure_experiment(n, m, beta=beta, replicas=replicas,
                                                  alpha=alpha, seed=seed)
            report.metrics["st_failure"] = {
                "crossing_found": rep3.crossing_found,
                "mean_z": rep3.mean_z, "means_equal": rep3.means_equal,
            }
            report.tables["stfail_points"] = verdict_table([rep3.verdict])
    report.wall_time_s = sw.elapsed
    return report


def she_scaling_experiment(
    law_name: str, n_list, t: float, x: float, m: int, replicas: int,
    alpha: float = orders.DEFAULT_ALPHA, seed: int = 0, threads: int = 1,
) -> ExperimentReport:
    law = resolve_law(law_name)
    config = {"law": law_name, "n_list": [int(v) for v in n_list], "t": t,
              "x": x, "m": m, "replicas": replicas, "alpha": alpha}
    report = ExperimentReport("she-scaling", config, seed)
    with StopWatch() as sw:
        rep = scaling.lt_domination_scaling(
            law, n_list, t, x, m, replicas, alpha=alpha, seed=seed, threads=threads
        )
        report.verdicts.extend(v.to_dict() for v in rep.verdicts)
        report.metrics["scaling"] = {
            "lattice_mean_z": rep.lattice_mean_z,
            "tree_mean_z": rep.tree_mean_z,
            "ks_successive_lattice": rep.ks_successive,
            "consistent": rep.consistent,
        }
        rows = []
        for i, n in enumerate(rep.n_list):
            for row in rep.verdicts[i].to_csv_rows():
                rows.append([n] + row)
        report.tables["points"] = (
            ["n", "order", "transform", "t", "lhs", "rhs", "se", "z", "outcome"], rows)
        series = []
        for i, n in enumerate(rep.n_list):
            pts = rep.verdicts[i].points
            series.append((f"lattice n={n}", [p.t for p in pts], [p.lhs for p in pts]))
        report.plots.append(("transforms", series,
                             "empirical Laplace transforms", "lambda", "E exp(-lambda V)", True))
    report.wall_time_s = sw.elapsed
    return report


def oracle_experiment(
    law_name: str, n: int, m: int, beta: float, lambdas, seed: int = 0,
) -> ExperimentReport:
    law = resolve_law(law_name)
    config = {"law": law_name, "n": n, "m": m, "beta": beta}
    report = ExperimentReport("oracle", config, seed)
    with StopWatch() as sw:
        cert = oracle.exact_lt_certificate(law, n, m, beta, lambdas)
        report.metrics["certificate"] = cert.as_dict()
        outcome = orders.CONSISTENT if cert.all_nonnegative else orders.VIOLATED
        report.verdicts.append({
            "order": "lt", "direction": "polymer <=_Lt mtree (exact)",
            "alpha": 0.0, "outcome": outcome, "points": [],
        })
        header = ["lambda", "polymer", "tree", "margin", "exact"]
        rows = [[float(l), float(p), float(tv), float(mg), True]
                for l, p, tv, mg in zip(cert.lambdas, cert.polymer, cert.tree, cert.margins)]
        report.tables["margins"] = (header, rows)
        funcs = [("log", oracle.Functional("log")),
                 ("pow_0.25", oracle.Functional.power(0.25)),
                 ("pow_0.5", oracle.Functional.power(0.5)),
                 ("pow_0.75", oracle.Functional.power(0.75)),
                 ("xlogx", oracle.Functional("xlogx"))]
        rows = []
        for name, f in funcs:
            spec = oracle.EnumerationSpec(law, n, 1, beta, f)
            pol = oracle.exact_expectation(spec)
            tree = oracle.exact_expectation_mtree(spec, m)
            claim = "pol >= tree" if name == "xlogx" else "pol <= tree"
            ok = pol >= tree if name == "xlogx" else pol <= tree
            rows.append([name, pol, tree, claim, bool(ok), True])
        report.tables["functionals"] = (
            ["functional", "polymer", "tree", "claim", "holds", "exact"], rows)
        if not all(r[4] for r in rows):
            report.verdicts.append({
                "order": "functional", "direction": "transform-order consequences",
                "alpha": 0.0, "outcome": orders.VIOLATED, "points": [],
            })
    report.wall_time_s = sw.elapsed
    return report


def polymer_experiment(
    law_name: str, beta: float, n: int, replicas: int, seed: int = 0, threads: int = 1,
) -> ExperimentReport:
    law = resolve_law(law_name)
    config = {"law": law_name, "beta": beta, "n": n, "replicas": replicas}
    report = ExperimentReport("polymer", config, seed)
    with StopWatch() as sw:
        est = cascade.estimate_free_energy_lattice(law, beta, n, replicas, seed, threads=threads)
        report.metrics["free_energy"] = est.as_dict()
        report.metrics["annealed_bound"] = cumulant(law, beta)
        w = lattice.sample_point_to_line_batch(law, beta, min(n, 50), replicas, seed, threads=threads)
        report.metrics["w_mean"] = float(w.mean())
        report.metrics["w_se"] = float(w.std(ddof=1) / math.sqrt(w.size))
    report.wall_time_s = sw.elapsed
    return report


def mtree_experiment(
    law_name: str, beta: float, m: int, levels: int, pool: int, seed: int = 0,
    upper_bound: list[int] | None = None, n: int = 200, replicas: int = 1000,
    threads: int = 1,
) -> ExperimentReport:
    law = resolve_law(law_name)
    config = {"law": law_name, "beta": beta, "m": m, "levels": levels, "pool": pool,
              "upper_bound": upper_bound, "n": n, "replicas": replicas}
    report = ExperimentReport("mtree", config, seed)
    with StopWatch() as sw:
        wlaw = cascade.CascadeWeightLaw(cascade.Alphabet.build(m, 1), beta, law, mean_one=True)
        est = cascade.estimate_free_energy_tree(wlaw, levels, pool, seed)
        report.metrics["free_energy_per_block"] = est.as_dict()
        rows = []
        for level, samples in cascade.pool_levels(wlaw, levels, pool, seed):
            rows.append([level, float(samples.mean()), float(np.log(samples).mean())])
        report.tables["pool_trajectory"] = (["level", "mean_w", "mean_log_w"], rows)
        if upper_bound:
            ub = cascade.upper_bound_check(
                law, beta, upper_bound, n, replicas, seed,
                pool_size=pool, n_levels=levels, threads=threads,
            )
            report.metrics["upper_bound"] = ub.as_dict()
            if not ub.consistent:
                report.verdicts.append({
                    "order": "free-energy", "direction": "lattice <= tree bound",
                    "alpha": 0.0, "outcome": orders.VIOLATED, "points": [],
                })
            series = [("tree bound per step",
                       [float(mm) for mm in upper_bound],
                       [ub.tree_estimates[mm].per_step(mm)[0] for mm in upper_bound]),
                      ("lattice estimate",
                       [float(mm) for mm in upper_bound],
                       [ub.lattice_estimate.value] * len(upper_bound))]
            report.plots.append(("free-energy", series, "free energy vs block length",
                                 "m", "per-step estimate", False))
    report.wall_time_s = sw.elapsed
    return report
