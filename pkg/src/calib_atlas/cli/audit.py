"""Run a configured audit and build the JSON report."""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Any

import jsonschema

from .. import __version__
from ..errors import CalibError
from ..losses import best_response
from ..metrics import (
    LevelResidualMap,
    aggregate,
    bayes_risk_estimation_residual,
    cost_gap,
    decision_calibration,
    distribution_calibration,
    gamma_calibration,
    realized_decision_loss,
    robust_swap_regret,
    swap_regret,
    vanilla_calibration,
)
from ..outcomes import Pmf, PredictionDataset
from ..serialize import dumps, to_plain
from .config import AuditConfig, load_schema
from .io import ingest

log = logging.getLogger(__name__)


def _level_map(ds: PredictionDataset, cfg: AuditConfig, m: dict) -> LevelResidualMap:
    mw = float(m.get("min_weight", 0.0))
    kind = m["type"]
    if kind == "vanilla":
        return vanilla_calibration(ds, m["prediction"], m.get("bin_width"), mw)
    if kind == "distribution":
        return distribution_calibration(ds, m["prediction"], cfg.properties[m["property"]], mw)
    if kind == "gamma":
        return gamma_calibration(ds, m["prediction"], cfg.properties[m["property"]], mw)
    loss, grid = cfg.losses[m["loss"]]
    return swap_regret(ds, m["prediction"], loss, grid, mw)


def _scalar(ds: PredictionDataset, cfg: AuditConfig, m: dict) -> float:
    kind = m["type"]
    if kind == "decision":
        pairs = {name: cfg.losses[name] for name in m["losses"]}
        return max(r.value for r in decision_calibration(ds, m["prediction"], pairs).values())
    if kind == "bayes_risk_residual":
        return bayes_risk_estimation_residual(ds, m["decision"], m["risk"], cfg.losses[m["loss"]][0]).value
    if kind == "bayes_risk":
        loss, grid = cfg.losses[m["loss"]]
        return best_response(loss, ds.marginal(), grid)[1]
    if kind == "realized_loss":
        return realized_decision_loss(ds, m["prediction"], *cfg.losses[m["loss"]])
    if kind == "cost_gap":
        a, b = m["losses"]
        return cost_gap(ds, m["prediction"], cfg.losses[a], cfg.losses[b])
    if kind == "robust_swap":
        loss, grid = cfg.losses[m["loss"]]
        return robust_swap_regret(ds, m["prediction"], loss, m["groups"], grid).value
    raise CalibError(f"unknown metric type {kind!r}")


LEVEL_TYPES = ("vanilla", "distribution", "gamma", "swap_regret")


def _level_rows(lm: LevelResidualMap) -> list[dict]:
    return [
        {"level": to_plain(e.level), "weight": e.weight, "residual": e.residual,
         "observed": to_plain(e.observed), "predicted": to_plain(e.predicted)}
        for e in lm
    ]


def _match_level(lm: LevelResidualMap, target: Any):
    for e in lm:
        lv = e.level
        if isinstance(lv, Pmf):
            lv = list(lv.weights)
        elif isinstance(lv, tuple):
            lv = list(lv)
        if lv == target:
            return e
    raise CalibError(f"level {target!r} not present")


def _evaluate(ds: PredictionDataset, cfg: AuditConfig, m: dict, skipped: dict) -> dict:
    """One metric on one (sub)dataset: levels, aggregate and value."""
    out: dict[str, Any] = {}
    if m["type"] in LEVEL_TYPES:
        lm = _level_map(ds, cfg, m)
        out["levels"] = _level_rows(lm)
        if lm.skipped:
            skipped[m["name"]] = to_plain(list(lm.skipped))
        if "level" in m:
            out["value"] = _match_level(lm, m["level"]).residual
        else:
            mode = m.get("aggregation", cfg.aggregation)
            out["aggregate"] = aggregate(lm, mode) if lm.entries else 0.0
            out["value"] = out["aggregate"]
    else:
        out["value"] = _scalar(ds, cfg, m)
    return out


def run_metric(ds: PredictionDataset, cfg: AuditConfig, m: dict, skipped: dict) -> dict:
    """Metric entry for the report. With ``groups`` the metric runs on each
    group and its complement and the reported value is the largest."""
    expect = float(m.get("expect", 0.0))
    tol = cfg.tol_for(m)
    entry: dict[str, Any] = {"type": m["type"], "expect": expect, "tol": tol}
    if m.get("groups") and m["type"] != "robust_swap":
        per = {}
        for g in m["groups"]:
            for flag in (1, 0):
                part = ds.restrict(g, flag) if any(r.groups[g] == flag for r in ds.records) else None
                if part is not None:
                    per[f"{g}={flag}"] = _evaluate(part, cfg, m, {})
        entry["groups"] = per
        entry["value"] = max(abs(v["value"] - expect) for v in per.values()) + expect
        entry["verdict"] = all(abs(v["value"] - expect) <= tol for v in per.values())
    else:
        entry.update(_evaluate(ds, cfg, m, skipped))
        entry["verdict"] = abs(entry["value"] - expect) <= tol
    return entry


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_audit(cfg: AuditConfig) -> dict:
    """Ingest, evaluate every metric and return the report document.

    A failing metric is recorded with its error and a false verdict; the
    report then carries ``failed: true`` and the remaining metrics still run.
    """
    warnings: list[str] = []
    ds = ingest(cfg.input_path, cfg.input_format, cfg.space, cfg.predictions, cfg.groups, warnings)
    metrics: dict[str, dict] = {}
    skipped: dict[str, list] = {}
    failed = False
    for m in cfg.metrics:
        try:
            metrics[m["name"]] = run_metric(ds, cfg, m, skipped)
        except CalibError as exc:
            log.error("metric %s: %s", m["name"], exc)
            metrics[m["name"]] = {"type": m["type"], "error": f"{type(exc).__name__}: {exc}", "verdict": False}
            failed = True
    for name, levels in skipped.items():
        warnings.append(f"{name}: skipped {len(levels)} level(s) at or below min_weight")
    report = {
        "provenance": {
            "config_sha256": cfg.sha256,
            "input_sha256": file_sha256(cfg.input_path),
            "version": __version__,
            "seed": cfg.seed,
            "n_records": len(ds.records),
            "outcome_labels": list(cfg.space.labels),
        },
        "metrics": metrics,
        "skipped_levels": skipped,
        "warnings": warnings,
        "passed": all(v["verdict"] for v in metrics.values()),
        "failed": failed,
    }
    report = to_plain(report)
    jsonschema.validate(report, load_schema("report"))
    return report


def write_report(report: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(dumps(report))
    return path
