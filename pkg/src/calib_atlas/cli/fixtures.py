"""Committed audit fixtures: the counterexample datasets plus an oracle
forecaster, each with a config whose expectations are the closed forms."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..outcomes import OutcomeSpace, lattice_pmf
from ..serialize import dumps
from ..verify.scenarios import (
    build_dataset,
    cost_parity_construction,
    cost_parity_q,
    counterexample_half_predictor,
    counterexample_mean_variance,
)
from .io import infer_predictions, write_csv, write_jsonl

COST_PARITY_F = (0.32, 0.35, 0.40)
MEAN_VARIANCE_V = 1.25


def _space_doc(space: OutcomeSpace) -> dict:
    doc = {"labels": list(space.labels)}
    if space.embedding is not None:
        doc["embedding"] = [float(v) for v in space.embedding]
    return doc


def _pred_docs(decls) -> list[dict]:
    out = []
    for d in decls:
        doc = {"name": d.name, "kind": d.kind}
        if d.kind == "dist":
            doc["prefix"] = d.prefix
        else:
            doc["column"] = d.column or d.name
        out.append(doc)
    return out


def _write(out: Path, stem: str, ds, config: dict, fmt: str = "csv") -> list[Path]:
    decls = infer_predictions(ds)
    data = out / f"{stem}.{fmt}"
    (write_csv if fmt == "csv" else write_jsonl)(ds, data, decls)
    config = {
        "input": {"path": data.name, "format": fmt},
        "outcome_space": _space_doc(ds.space),
        "predictions": _pred_docs(decls),
        **config,
    }
    cfg = out / f"{stem}.config.json"
    cfg.write_text(dumps(config))
    return [data, cfg]


def half_predictor_configs() -> tuple[dict, dict]:
    """(closed-form reproduction, residual screen) configs."""
    base = {
        "losses": [{"name": "squared", "type": "squared", "grid": {"linspace": [0.0, 1.0, 101]}}],
        "groups": [],
        "seed": 0,
    }
    exact = dict(base, metrics=[
        {"name": "decision_squared", "type": "decision", "prediction": "dist_pred",
         "losses": ["squared"], "expect": 0.0, "tol": 1e-12},
        {"name": "vanilla_at_half", "type": "vanilla", "prediction": "pred", "level": 0.5,
         "expect": 0.3, "tol": 1e-12},
    ])
    screen = dict(base, metrics=[
        {"name": "decision_squared", "type": "decision", "prediction": "dist_pred",
         "losses": ["squared"], "tol": 1e-9},
        {"name": "vanilla", "type": "vanilla", "prediction": "pred", "tol": 1e-3},
    ])
    return exact, screen


def build_fixtures(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    half = counterexample_half_predictor(0.8)
    exact, screen = half_predictor_configs()
    written += _write(out, "half_predictor", half.dataset, exact)
    cfg = out / "half_predictor_screen.config.json"
    doc = {"input": {"path": "half_predictor.csv", "format": "csv"},
           "outcome_space": _space_doc(half.dataset.space),
           "predictions": _pred_docs(infer_predictions(half.dataset)), **screen}
    cfg.write_text(dumps(doc))
    written.append(cfg)

    v = MEAN_VARIANCE_V
    mv = counterexample_mean_variance(v)
    written += _write(out, "mean_variance", mv.dataset, {
        "properties": [{"name": "mean", "type": "mean"}, {"name": "variance", "type": "variance"}],
        "losses": [{"name": "squared", "type": "squared"}],
        "metrics": [
            {"name": "bayes_risk_residual", "type": "bayes_risk_residual", "decision": "mean_pred",
             "risk": "var_pred", "loss": "squared", "expect": 0.0, "tol": 1e-9},
            {"name": "variance_at_v", "type": "gamma", "prediction": "var_pred", "property": "variance",
             "level": v, "expect": 1.0, "tol": 1e-9},
            {"name": "variance_at_v_plus_1", "type": "gamma", "prediction": "var_pred",
             "property": "variance", "level": v + 1.0, "expect": 1.0, "tol": 1e-9},
            {"name": "mean_at_0", "type": "gamma", "prediction": "mean_pred", "property": "mean",
             "level": 0.0, "expect": 1.0, "tol": 1e-9},
            {"name": "mean_at_1", "type": "gamma", "prediction": "mean_pred", "property": "mean",
             "level": 1.0, "expect": 1.0, "tol": 1e-9},
        ],
        "seed": 0,
    })

    c, d = 0.6, 0.3
    q = cost_parity_q(c, d)
    for f in COST_PARITY_F:
        sc = cost_parity_construction(c, d, f)
        gap = (1.0 - q) * abs(f * (1.0 - c) / (1.0 - f) - d)
        written += _write(out, f"cost_parity_{f:.2f}", sc.dataset, {
            "losses": [{"name": "simple_c", "type": "simple", "q": c},
                       {"name": "simple_d", "type": "simple", "q": d}],
            "metrics": [
                {"name": "vanilla_at_f", "type": "vanilla", "prediction": "pred", "level": f,
                 "expect": 0.0, "tol": 1e-12},
                {"name": "vanilla_at_1", "type": "vanilla", "prediction": "pred", "level": 1.0,
                 "expect": 0.0, "tol": 1e-12},
                {"name": "bayes_risk_c", "type": "bayes_risk", "loss": "simple_c",
                 "expect": (1.0 - c) * q, "tol": 1e-12},
                {"name": "bayes_risk_d", "type": "bayes_risk", "loss": "simple_d",
                 "expect": d * (1.0 - q), "tol": 1e-12},
                {"name": "cost_gap", "type": "cost_gap", "prediction": "dist_pred",
                 "losses": ["simple_c", "simple_d"], "expect": gap, "tol": 1e-12},
            ],
            "seed": 0,
        })

    written += _write(out, "oracle_three", oracle_dataset(), {
        "properties": [{"name": "mode", "type": "mode"},
                       {"name": "full", "type": "full_distribution"}],
        "losses": [{"name": "zero_one", "type": "zero_one"}],
        "groups": ["half"],
        "metrics": [
            {"name": "distribution_mode", "type": "distribution", "prediction": "dist_pred",
             "property": "mode"},
            {"name": "distribution_full", "type": "distribution", "prediction": "dist_pred",
             "property": "full", "groups": ["half"]},
            {"name": "decision_zero_one", "type": "decision", "prediction": "dist_pred",
             "losses": ["zero_one"]},
        ],
        "seed": 0,
    }, fmt="jsonl")
    return written


def oracle_dataset():
    """Three outcomes; every forecast equals its input's true conditional."""
    space = OutcomeSpace(("0", "1", "2"), (0.0, 1.0, 2.0))
    rng = np.random.default_rng(20240)
    pool = [lattice_pmf(space, rng, 64) for _ in range(3)]
    blocks = []
    for i in range(6):
        p = pool[i % 3]
        blocks.append((f"x{i}", 1.0, p, {"dist_pred": p}, {"half": int(i < 3)}))
    return build_dataset(space, blocks, "oracle_three")
