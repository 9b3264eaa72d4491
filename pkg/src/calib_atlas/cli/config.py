"""Audit configuration: one JSON document, validated before any data is read."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from ..errors import CalibError, ConfigError
from ..losses import (
    LossFn,
    loss_from_identification,
    make_identification,
    make_simple_loss,
    pinball_loss,
    squared_loss,
    zero_one_loss,
)
from ..outcomes import OutcomeSpace
from ..properties import Property, make_standard_property, mean_grid

# which references each metric type needs: key -> kind of object it names
METRIC_REFS: dict[str, dict[str, str]] = {
    "vanilla": {"prediction": "real"},
    "distribution": {"prediction": "dist", "property": "property"},
    "gamma": {"prediction": "any", "property": "property"},
    "swap_regret": {"prediction": "any", "loss": "loss"},
    "decision": {"prediction": "dist", "losses": "loss"},
    "bayes_risk_residual": {"decision": "any", "risk": "real", "loss": "loss"},
    "bayes_risk": {"loss": "loss"},
    "realized_loss": {"prediction": "dist", "loss": "loss"},
    "cost_gap": {"prediction": "dist", "losses": "loss"},
    "robust_swap": {"prediction": "any", "loss": "loss", "groups": "group"},
}

DEFAULT_TOL = 1e-9


def load_schema(name: str) -> dict:
    """One of the committed schemas: config, report or manifest."""
    text = resources.files("calib_atlas").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


@dataclass
class PredictionDecl:
    name: str
    kind: str
    column: str | None = None
    prefix: str = "p_"


@dataclass
class AuditConfig:
    input_path: Path
    input_format: str
    space: OutcomeSpace
    predictions: list[PredictionDecl]
    properties: dict[str, Property]
    losses: dict[str, tuple[LossFn, tuple]]
    metrics: list[dict]
    groups: list[str] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=dict)
    aggregation: str = "sup"
    seed: int = 0
    sha256: str = ""

    def prediction(self, name: str) -> PredictionDecl:
        for p in self.predictions:
            if p.name == name:
                return p
        raise ConfigError(f"undeclared prediction {name!r}")

    def tol_for(self, metric: dict) -> float:
        t = metric.get("tol", "default")
        if isinstance(t, str):
            if t in self.tolerances:
                return float(self.tolerances[t])
            if t == "default":
                return DEFAULT_TOL
            raise ConfigError(f"metric {metric['name']!r}: unknown tolerance {t!r}")
        return float(t)


def _build_property(spec: dict, space: OutcomeSpace) -> Property:
    params = {k: v for k, v in spec.items() if k not in ("name", "type")}
    for key in ("g", "h"):
        if key in params:
            params[key] = np.asarray(params[key], dtype=float)
    try:
        prop = make_standard_property(spec["type"], space, **params)
    except (CalibError, TypeError) as exc:
        raise ConfigError(f"property {spec['name']!r}: {exc}") from None
    return prop


def _build_loss(spec: dict, space: OutcomeSpace) -> tuple[LossFn, tuple]:
    kind = spec["type"]
    try:
        if kind == "squared":
            loss = squared_loss(space, float(spec.get("scale", 1.0)))
        elif kind == "pinball":
            loss = pinball_loss(space, float(spec["tau"]))
        elif kind == "zero_one":
            loss = zero_one_loss(space)
        elif kind == "from_identification":
            # remaining keys (tau, g, h, v) parameterize the identification function
            params = {k: v for k, v in spec.items()
                      if k not in ("name", "type", "identification", "gamma0", "n_quad", "kappa", "grid")}
            ident = make_identification(spec["identification"], space, **params)
            loss = loss_from_identification(ident, float(spec.get("gamma0", 0.0)), spec.get("kappa"),
                                            int(spec.get("n_quad", 64)))
        else:
            loss, _ = make_simple_loss(float(spec["q"]), space)
    except KeyError as exc:
        raise ConfigError(f"loss {spec['name']!r}: missing parameter {exc}") from None
    except (CalibError, TypeError) as exc:
        raise ConfigError(f"loss {spec['name']!r}: {exc}") from None
    grid = spec.get("grid")
    if grid is None:
        grid = loss.grid if loss.grid is not None else mean_grid(space)
    elif isinstance(grid, dict):
        a, b, n = grid["linspace"]
        grid = tuple(float(v) for v in np.linspace(a, b, int(n)))
    return loss, tuple(grid)


def parse_config(doc: dict, base_dir: Path | None = None, sha256: str = "") -> AuditConfig:
    """Validate against the schema, then check every cross-reference."""
    try:
        jsonschema.validate(doc, load_schema("config"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None
    sp_doc = doc["outcome_space"]
    try:
        space = OutcomeSpace(tuple(sp_doc["labels"]), tuple(sp_doc["embedding"]) if "embedding" in sp_doc else None)
    except CalibError as exc:
        raise ConfigError(f"outcome_space: {exc}") from None
    preds = [PredictionDecl(p["name"], p["kind"], p.get("column"), p.get("prefix", "p_")) for p in doc["predictions"]]
    names = [p.name for p in preds]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate prediction names")
    prefixes = [p.prefix for p in preds if p.kind == "dist"]
    if len(set(prefixes)) != len(prefixes):
        raise ConfigError("distributional predictions need distinct column prefixes")
    props = {}
    for spec in doc.get("properties", []):
        if spec["name"] in props:
            raise ConfigError(f"duplicate property {spec['name']!r}")
        props[spec["name"]] = _build_property(spec, space)
    losses = {}
    for spec in doc.get("losses", []):
        if spec["name"] in losses:
            raise ConfigError(f"duplicate loss {spec['name']!r}")
        losses[spec["name"]] = _build_loss(spec, space)
    groups = list(doc.get("groups", []))
    base = base_dir or Path(".")
    path = Path(doc["input"]["path"])
    fmt = doc["input"].get("format") or ("jsonl" if path.suffix == ".jsonl" else "csv")
    cfg = AuditConfig(
        base / path if not path.is_absolute() else path, fmt, space, preds, props, losses,
        list(doc["metrics"]), groups, dict(doc.get("tolerances", {})),
        doc.get("aggregation", "sup"), int(doc.get("seed", 0)), sha256 or config_doc_hash(doc),
    )
    seen = set()
    for m in cfg.metrics:
        if m["name"] in seen:
            raise ConfigError(f"duplicate metric {m['name']!r}")
        seen.add(m["name"])
        _check_refs(cfg, m)
        cfg.tol_for(m)
    return cfg


def _check_refs(cfg: AuditConfig, m: dict) -> None:
    label = f"metric {m['name']!r}"
    for key, kind in METRIC_REFS[m["type"]].items():
        if key not in m:
            raise ConfigError(f"{label}: {m['type']} needs {key!r}")
        refs = m[key] if isinstance(m[key], list) else [m[key]]
        for ref in refs:
            if kind == "property" and ref not in cfg.properties:
                raise ConfigError(f"{label}: undeclared property {ref!r}")
            elif kind == "loss" and ref not in cfg.losses:
                raise ConfigError(f"{label}: undeclared loss {ref!r}")
            elif kind == "group" and ref not in cfg.groups:
                raise ConfigError(f"{label}: undeclared group {ref!r}")
            elif kind in ("real", "dist", "any"):
                decl = cfg.prediction(ref) if ref in [p.name for p in cfg.predictions] else None
                if decl is None:
                    raise ConfigError(f"{label}: undeclared prediction {ref!r}")
                if kind != "any" and decl.kind != kind:
                    raise ConfigError(f"{label}: prediction {ref!r} must be {kind}, not {decl.kind}")
    if m["type"] == "cost_gap" and len(m["losses"]) != 2:
        raise ConfigError(f"{label}: cost_gap compares exactly two losses")
    for g in m.get("groups", []):
        if g not in cfg.groups:
            raise ConfigError(f"{label}: undeclared group {g!r}")


def load_config(path: str | Path) -> AuditConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc, path.parent, hashlib.sha256(raw).hexdigest())


def config_doc_hash(doc: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
