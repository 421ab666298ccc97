"""Report emission: JSON reports, CSV tables, and standalone SVG plots.

All numeric output is formatted with %.17g so that a config plus a master
seed reproduces every file byte for byte; plot files embed their data as
XML comments and carry no timestamps."""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = "1"

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "polycasc experiment report",
    "type": "object",
    "required": [
        "name", "schema_version", "config", "seed", "verdicts",
        "metrics", "tables", "wall_time_s",
    ],
    "properties": {
        "name": {"type": "string"},
        "schema_version": {"type": "string"},
        "config": {"type": "object"},
        "seed": {"type": "integer"},
        "seed_lineage": {"type": "string"},
        "verdicts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["order", "direction", "outcome", "alpha"],
                "properties": {
                    "order": {"type": "string"},
                    "direction": {"type": "string"},
                    "outcome": {"enum": ["CONSISTENT", "VIOLATED", "INCONCLUSIVE"]},
                    "alpha": {"type": "number"},
                    "points": {"type": "array"},
                },
            },
        },
        "metrics": {"type": "object"},
        "tables": {"type": "object"},
        "wall_time_s": {"type": "number"},
    },
}


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def line_plot_svg(
    path: Path,
    series: list[tuple[str, list[float], list[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
) -> None:
    """Minimal standalone SVG line plot with the data embedded as comments."""
    width, height, pad = 640, 420, 56
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]

    def tx(x):
        if logx:
            x = math.log10(max(x, 1e-300))
        lo = math.log10(max(min(xs_all), 1e-300)) if logx else min(xs_all)
        hi = math.log10(max(xs_all)) if logx else max(xs_all)
        span = (hi - lo) or 1.0
        return pad + (x - lo) / span * (width - 2 * pad)

    def ty(y):
        lo, hi = min(ys_all), max(ys_all)
        span = (hi - lo) or 1.0
        return height - pad - (y - lo) / span * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- title: {title} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<text x="{width/2:.1f}" y="{height-12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{height/2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {height/2:.1f})">{ylabel}</text>',
        f'<rect x="{pad}" y="{pad}" width="{width-2*pad}" height="{height-2*pad}" '
        f'fill="none" stroke="#999"/>',
    ]
    for k, (label, xs, ys) in enumerate(series):
        data = " ".join(f"{fmt(float(x))}:{fmt(float(y))}" for x, y in zip(xs, ys))
        parts.append(f"<!-- series {label}: {data} -->")
        pts = " ".join(f"{tx(float(x)):.2f},{ty(float(y)):.2f}" for x, y in zip(xs, ys))
        color = colors[k % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width-pad+4}" y="{pad+14*(k+1)}" font-size="11" '
            f'fill="{color}" text-anchor="end">{label}</text>'
        )
    parts.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")


@dataclass
class ExperimentReport:
    """Everything one experiment produced; every numeric claim in metrics
    and tables carries either a stderr column or an `exact` flag."""

    name: str
    config: dict
    seed: int
    verdicts: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plots: list = field(default_factory=list)   # (filename, series, labels...)
    seed_lineage: str = ""
    wall_time_s: float = 0.0

    def outcome_exit_code(self) -> int:
        for v in self.verdicts:
            out = v.get("outcome") if isinstance(v, dict) else None
            if out == "VIOLATED":
                return 2
        return 0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "seed": self.seed,
            "seed_lineage": self.seed_lineage,
            "verdicts": self.verdicts,
            "metrics": self.metrics,
            "tables": {k: {"header": h, "rows": len(r)} for k, (h, r) in self.tables.items()},
            "wall_time_s": self.wall_time_s,
        }

    def write(self, outdir: Path) -> Path:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        report_path = outdir / f"{self.name}.json"
        report_path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        schema_path = outdir / "report.schema.json"
        if not schema_path.exists():
            schema_path.write_text(json.dumps(REPORT_SCHEMA, indent=2, sort_keys=True) + "\n")
        for tname, (header, rows) in self.tables.items():
            write_csv(outdir / f"{self.name}.{tname}.csv", header, rows)
        for pname, series, title, xlabel, ylabel, logx in self.plots:
            line_plot_svg(outdir / f"{self.name}.{pname}.svg", series, title, xlabel, ylabel, logx)
        return report_path


class StopWatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


def default_outdir() -> Path:
    return Path(os.environ.get("POLYCASC_OUT", "polycasc-out"))


def verdict_table(verdicts) -> tuple[list[str], list[list]]:
    header = ["order", "transform", "t", "lhs", "rhs", "se", "z", "outcome"]
    rows = []
    for v in verdicts:
        rows.extend(v.to_csv_rows())
    return header, rows
