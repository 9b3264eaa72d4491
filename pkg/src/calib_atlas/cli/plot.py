"""Plain data files for reliability diagrams and simplex plots."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Any

RELIABILITY_HEADER = ["level", "weight", "observed", "predicted", "residual"]


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, list):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name)


def emit_plot_data(report: dict, out_dir: str | Path) -> list[Path]:
    """``<metric>.reliability.csv`` per level metric; ``simplex.csv`` for
    distribution metrics on three outcomes. Vector cells are ';'-joined."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = report["provenance"]["outcome_labels"]
    written = []
    simplex_rows = []
    for name, m in sorted(report["metrics"].items()):
        if "levels" not in m:
            continue
        path = out / f"{_safe(name)}.reliability.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RELIABILITY_HEADER)
            for e in m["levels"]:
                w.writerow([_cell(e["level"]), _cell(e["weight"]), _cell(e.get("observed", "")),
                            _cell(e.get("predicted", "")), _cell(e["residual"])])
        written.append(path)
        if m["type"] == "distribution" and len(labels) == 3:
            for e in m["levels"]:
                simplex_rows.append([name, _cell(e["level"])]
                                    + [_cell(v) for v in e["predicted"]]
                                    + [_cell(v) for v in e["observed"]])
    if len(labels) == 3 and any(m.get("type") == "distribution" for m in report["metrics"].values()):
        path = out / "simplex.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "level"] + [f"pred_{lab}" for lab in labels] + [f"obs_{lab}" for lab in labels])
            w.writerows(simplex_rows)
        written.append(path)
    return written


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
