"""Command-line experiment runner.

Subcommands mirror the experiment functions; every run writes a JSON report
plus CSV tables and SVG plots into the output directory.  Exit code 0 means
no check was violated, 2 means at least one claimed inequality was violated,
1 means the run itself failed.  A JSON config file can supply any flag;
explicit flags override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, orders
from .reporting import ExperimentReport, default_outdir

DEFAULT_SEED = 20250801


def parse_grid(spec: str) -> list[float]:
    """Grid syntax: 'a:b:step' inclusive, 'a:b:logN' log-spaced, or 'a,b,c'."""
    if ":" in spec:
        lo, hi, step = spec.split(":")
        if step.startswith("log"):
            num = int(step[3:])
            return [float(v) for v in np.logspace(math.log10(float(lo)),
                                                  math.log10(float(hi)), num)]
        lo, hi, step = float(lo), float(hi), float(step)
        n = int(round((hi - lo) / step))
        return [lo + k * step for k in range(n + 1)]
    return [float(v) for v in spec.split(",")]


def parse_int_list(spec: str) -> list[int]:
    return [int(v) for v in spec.split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--alpha", type=float, default=None,
                   help="per-point significance level (default z=3)")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", type=str, default=None, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polycasc")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("polymer", help="lattice free energy and partition statistics")
    p.add_argument("--law", default="bernoulli")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--replicas", type=int, default=1000)
    _add_common(p)

    p = sub.add_parser("mtree", help="cascade pools, free energy, upper bound")
    p.add_argument("--law", default="bernoulli")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--levels", type=int, default=20)
    p.add_argument("--pool", type=int, default=10000)
    p.add_argument("--upper-bound", type=str, default=None,
                   help="comma list of m values to check the bound against")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--replicas", type=int, default=1000)
    _add_common(p)

    p = sub.add_parser("order-check", help="stochastic-order claim between models")
    p.add_argument("--claim", choices=["lt", "st", "cx"], required=True)
    p.add_argument("--x", dest="x_side", choices=["polymer", "mtree"], required=True)
    p.add_argument("--y", dest="y_side", choices=["polymer", "mtree"], required=True)
    p.add_argument("--law", default="bernoulli")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--replicas", type=int, default=10**5)
    p.add_argument("--engine", choices=["mc", "oracle"], default="mc")
    p.add_argument("--lambdas", type=str, default=None)
    _add_common(p)

    p = sub.add_parser("peacock", help="convex-order monotonicity in beta")
    p.add_argument("--env", default="gaussian")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--beta-grid", type=str, default="0:1:0.25")
    p.add_argument("--replicas", type=int, default=10**5)
    p.add_argument("--check", type=str, default="cx",
                   help="comma list from {cx,martingale,marginals}")
    _add_common(p)

    p = sub.add_parser("spinglass", help="spin-glass convex-order monotonicity")
    p.add_argument("--model", choices=["sk", "ea", "rfim"], default="sk")
    p.add_argument("--n", type=int, default=10, help="spin count (sk)")
    p.add_argument("--side", type=int, default=3, help="torus side (ea/rfim)")
    p.add_argument("--j", type=float, default=0.5, help="coupling (rfim)")
    p.add_argument("--beta-grid", type=str, default="0:1.5:0.5")
    p.add_argument("--replicas", type=int, default=10**4)
    _add_common(p)

    p = sub.add_parser("gaussian-cov", help="covariance preconditions and Gaussian checks")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--check", type=str, default="slepian",
                   help="comma list from {slepian,max,elogz,stfail}")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--replicas", type=int, default=10**5)
    _add_common(p)

    p = sub.add_parser("she-scaling", help="intermediate-disorder transform domination")
    p.add_argument("--n", type=str, default="64,256,1024")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--law", default="bernoulli")
    p.add_argument("--replicas", type=int, default=10**5)
    _add_common(p)

    p = sub.add_parser("oracle", help="exact transform certificate at desk scale")
    p.add_argument("--law", default="bernoulli")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--beta", type=float, default=0.7)
    p.add_argument("--lambdas", type=str, default="0.01:100:log21")
    _add_common(p)

    p = sub.add_parser("association", help="shared-field block family inequality")
    p.add_argument("--law", default="gaussian")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--replicas", type=int, default=10**5)
    p.add_argument("--lambdas", type=str, default=None)
    _add_common(p)

    p = sub.add_parser("suite", help="run a manifest of experiment configs")
    p.add_argument("--manifest", type=str, required=True)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--keep-going", action="store_true")
    _add_common(p)

    return ap


def _merge_config(args: argparse.Namespace) -> dict:
    """Flags override config-file entries; unset common flags get defaults."""
    cfg: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            cfg = json.loads(path.read_text())
        except FileNotFoundError:
            raise SystemExit(f"config error: file not found: {path}")
        except json.JSONDecodeError as e:
            raise SystemExit(f"config error in {path}: line {e.lineno}: {e.msg}")
        if not isinstance(cfg, dict):
            raise SystemExit(f"config error in {path}: top level must be an object")
    merged = dict(cfg)
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            merged[key] = value
    merged.setdefault("seed", DEFAULT_SEED)
    merged.setdefault("alpha", orders.DEFAULT_ALPHA)
    merged.setdefault("threads", 1)
    merged.setdefault("out", str(default_outdir()))
    return merged


def run(command: str, cfg: dict) -> ExperimentReport:
    """Execute one named experiment from a merged config dict."""
    seed = int(cfg["seed"])
    alpha = float(cfg["alpha"])
    threads = int(cfg.get("threads", 1))
    if command == "polymer":
        return experiments.polymer_experiment(
            cfg["law"], float(cfg["beta"]), int(cfg["n"]), int(cfg["replicas"]),
            seed=seed, threads=threads)
    if command == "mtree":
        ub = cfg.get("upper_bound")
        if isinstance(ub, str):
            ub = parse_int_list(ub)
        return experiments.mtree_experiment(
            cfg["law"], float(cfg["beta"]), int(cfg["m"]), int(cfg["levels"]),
            int(cfg["pool"]), seed=seed, upper_bound=ub, n=int(cfg.get("n", 200)),
            replicas=int(cfg.get("replicas", 1000)), threads=threads)
    if command == "order-check":
        lambdas = cfg.get("lambdas")
        if isinstance(lambdas, str):
            lambdas = parse_grid(lambdas)
        return experiments.order_check(
            cfg["claim"], cfg["x_side"], cfg["y_side"], cfg["law"], int(cfg["n"]),
            None if cfg.get("m") is None else int(cfg["m"]), float(cfg["beta"]),
            int(cfg["replicas"]), alpha=alpha, seed=seed, threads=threads,
            engine=cfg.get("engine", "mc"), lambdas=lambdas)
    if command == "peacock":
        checks = cfg.get("check", "cx")
        if isinstance(checks, str):
            checks = checks.split(",")
        return experiments.peacock_experiment(
            cfg["env"], int(cfg["n"]), parse_grid(str(cfg["beta_grid"])),
            int(cfg["replicas"]), checks=checks, alpha=alpha, seed=seed,
            threads=threads)
    if command == "spinglass":
        return experiments.spinglass_experiment(
            cfg["model"], int(cfg["n"]), int(cfg["side"]), float(cfg["j"]),
            parse_grid(str(cfg["beta_grid"])), int(cfg["replicas"]),
            alpha=alpha, seed=seed)
    if command == "gaussian-cov":
        checks = cfg.get("check", "slepian")
        if isinstance(checks, str):
            checks = checks.split(",")
        return experiments.gaussian_cov_experiment(
            int(cfg["n"]), int(cfg["m"]), checks=checks, beta=float(cfg["beta"]),
            replicas=int(cfg["replicas"]), alpha=alpha, seed=seed)
    if command == "she-scaling":
        n_list = cfg["n"]
        if isinstance(n_list, str):
            n_list = parse_int_list(n_list)
        return experiments.she_scaling_experiment(
            cfg["law"], n_list, float(cfg["t"]), float(cfg["x"]), int(cfg["m"]),
            int(cfg["replicas"]), alpha=alpha, seed=seed, threads=threads)
    if command == "oracle":
        lambdas = cfg.get("lambdas", "0.01:100:log21")
        if isinstance(lambdas, str):
            lambdas = parse_grid(lambdas)
        return experiments.oracle_experiment(
            cfg["law"], int(cfg["n"]), int(cfg["m"]), float(cfg["beta"]),
            lambdas, seed=seed)
    if command == "association":
        lambdas = cfg.get("lambdas")
        if isinstance(lambdas, str):
            lambdas = parse_grid(lambdas)
        return experiments.association_experiment(
            cfg["law"], int(cfg["k"]), int(cfg["m"]), float(cfg["beta"]),
            int(cfg["replicas"]), lambdas=lambdas, alpha=alpha, seed=seed)
    raise SystemExit(f"unknown command {command!r}")


def run_suite(cfg: dict) -> int:
    manifest_path = Path(cfg["manifest"])
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise SystemExit(f"config error: manifest not found: {manifest_path}")
    except json.JSONDecodeError as e:
        raise SystemExit(f"config error in {manifest_path}: line {e.lineno}: {e.msg}")
    if not isinstance(manifest, list):
        raise SystemExit("manifest must be a JSON array of configs")
    outdir = Path(cfg["out"])
    rows = []
    worst = 0

    def run_one(idx_entry):
        idx, entry = idx_entry
        entry = dict(entry)
        command = entry.pop("command")
        entry.setdefault("seed", cfg["seed"])
        entry.setdefault("alpha", cfg["alpha"])
        entry.setdefault("threads", cfg.get("threads", 1))
        entry.setdefault("out", str(outdir))
        report = run(command, entry)
        report.name = f"{report.name}-{idx:03d}"
        report.write(outdir)
        return idx, command, report

    entries = list(enumerate(manifest))
    results = []
    if int(cfg.get("parallel", 1)) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=int(cfg["parallel"])) as ex:
            futs = [ex.submit(run_one, e) for e in entries]
            for f in futs:
                try:
                    results.append(f.result())
                except Exception as exc:  # noqa: BLE001
                    if not cfg.get("keep_going"):
                        raise
                    results.append((-1, f"error: {exc}", None))
    else:
        for e in entries:
            try:
                results.append(run_one(e))
            except Exception as exc:  # noqa: BLE001
                if not cfg.get("keep_going"):
                    raise
                results.append((e[0], f"error: {exc}", None))
    for idx, command, report in sorted(results, key=lambda r: r[0]):
        if report is None:
            rows.append({"index": idx, "command": command, "outcome": "ERROR"})
            worst = max(worst, 1)
            continue
        code = report.outcome_exit_code()
        worst = max(worst, code)
        rows.append({
            "index": idx, "command": command, "report": report.name,
            "outcome": "VIOLATED" if code == 2 else "OK",
            "wall_time_s": report.wall_time_s,
        })
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {"configs": len(manifest), "rows": rows, "exit_code": worst}
    (outdir / "suite-summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return worst


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _merge_config(args)
    try:
        if args.command == "suite":
            return run_suite(cfg)
        report = run(args.command, cfg)
        path = report.write(Path(cfg["out"]))
        code = report.outcome_exit_code()
        print(f"{report.name}: wrote {path} (exit {code})")
        return code
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
