"""CSV / JSONL ingestion and emission of prediction datasets.

CSV columns: ``x_id``, ``y``, optional ``weight``, one column per scalar
prediction, a ``<prefix><label>`` family per distributional prediction and
``g_<name>`` flags for groups. JSONL rows carry the same data with
predictions nested under ``pred`` and flags under ``groups``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from ..errors import RowError, SchemaError
from ..outcomes import NORM_TOL, OutcomeSpace, Pmf, PredictionDataset, Record, pmf_new
from .config import PredictionDecl

log = logging.getLogger(__name__)

ROW_NORM_TOL = 1e-6


def _num(text: Any, what: str, line: int) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise RowError(f"{what}: not a number ({text!r})", line) from None
    if not math.isfinite(v):
        raise RowError(f"{what}: not finite ({text!r})", line)
    return v


def _dist(space: OutcomeSpace, raw: Sequence[float], name: str, line: int, warnings: list) -> Pmf:
    if any(v < 0 for v in raw):
        raise RowError(f"{name}: negative probability", line)
    total = math.fsum(raw)
    if abs(total - 1.0) > ROW_NORM_TOL:
        raise RowError(f"{name}: probabilities sum to {total!r}, not 1", line)
    if abs(total - 1.0) < NORM_TOL:
        # float export noise: keep the values bit-exact
        return Pmf(space, tuple(raw))
    msg = f"line {line}: {name} renormalized (sum {total!r})"
    log.info(msg)
    warnings.append(msg)
    return pmf_new(space, [v / total for v in raw])


def _flag(text: Any, name: str, line: int) -> int:
    if str(text).strip() in ("0", "1"):
        return int(str(text).strip())
    raise RowError(f"group {name}: flag must be 0 or 1, got {text!r}", line)


def _record(space, x_id, y, weight, preds, groups, line) -> Record | None:
    if y not in space.labels:
        raise RowError(f"unknown outcome label {y!r}", line)
    if weight < 0:
        raise RowError(f"negative weight {weight!r}", line)
    if weight == 0:
        return None
    return Record(str(x_id), y, preds, groups, weight)


def ingest(
    path: str | Path,
    fmt: str,
    space: OutcomeSpace,
    predictions: Sequence[PredictionDecl],
    groups: Sequence[str] = (),
    warnings: list | None = None,
) -> PredictionDataset:
    """Read a dataset; zero-weight rows are dropped, row problems raise
    RowError with the 1-based line number."""
    warnings = warnings if warnings is not None else []
    path = Path(path)
    if fmt == "csv":
        recs = _read_csv(path, space, predictions, groups, warnings)
    elif fmt == "jsonl":
        recs = _read_jsonl(path, space, predictions, groups, warnings)
    else:
        raise SchemaError(f"unknown input format {fmt!r}")
    if not recs:
        raise SchemaError(f"{path}: no records with positive weight")
    return PredictionDataset(space, tuple(recs), path.stem)


def _read_csv(path, space, predictions, groups, warnings) -> list[Record]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = ["x_id", "y"]
        for p in predictions:
            if p.kind == "dist":
                needed += [p.prefix + lab for lab in space.labels]
            else:
                needed.append(p.column or p.name)
        needed += ["g_" + g for g in groups]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        recs = []
        for row in reader:
            line = reader.line_num
            preds: dict[str, Any] = {}
            for p in predictions:
                if p.kind == "dist":
                    raw = [_num(row[p.prefix + lab], p.prefix + lab, line) for lab in space.labels]
                    preds[p.name] = _dist(space, raw, p.name, line, warnings)
                elif p.kind == "real":
                    preds[p.name] = _num(row[p.column or p.name], p.name, line)
                else:
                    preds[p.name] = row[p.column or p.name]
            flags = {g: _flag(row["g_" + g], g, line) for g in groups}
            weight = _num(row["weight"], "weight", line) if "weight" in header and row["weight"] != "" else 1.0
            rec = _record(space, row["x_id"], row["y"], weight, preds, flags, line)
            if rec is not None:
                recs.append(rec)
    return recs


def _read_jsonl(path, space, predictions, groups, warnings) -> list[Record]:
    recs = []
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise RowError(f"invalid JSON ({exc.msg})", line) from None
            for key in ("x_id", "y"):
                if key not in obj:
                    raise RowError(f"missing key {key!r}", line)
            pred_obj = obj.get("pred", {})
            preds: dict[str, Any] = {}
            for p in predictions:
                if p.name not in pred_obj:
                    raise RowError(f"missing prediction {p.name!r}", line)
                v = pred_obj[p.name]
                if p.kind == "dist":
                    if not isinstance(v, dict) or set(v) != set(space.labels):
                        raise RowError(f"{p.name}: expected an object keyed by outcome labels", line)
                    raw = [_num(v[lab], f"{p.name}[{lab}]", line) for lab in space.labels]
                    preds[p.name] = _dist(space, raw, p.name, line, warnings)
                elif p.kind == "real":
                    preds[p.name] = _num(v, p.name, line)
                else:
                    preds[p.name] = str(v)
            flag_obj = obj.get("groups", {})
            flags = {}
            for g in groups:
                if g not in flag_obj:
                    raise RowError(f"missing group flag {g!r}", line)
                flags[g] = _flag(flag_obj[g], g, line)
            weight = _num(obj.get("weight", 1.0), "weight", line)
            rec = _record(space, obj["x_id"], str(obj["y"]), weight, preds, flags, line)
            if rec is not None:
                recs.append(rec)
    return recs


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def infer_predictions(dataset: PredictionDataset) -> list[PredictionDecl]:
    """Declarations matching a dataset's prediction values (dist columns use
    ``p_`` for the first distributional prediction, ``p_<name>_`` after)."""
    decls = []
    first = dataset.records[0]
    n_dist = 0
    for name in dataset.prediction_names:
        v = first.preds[name]
        if isinstance(v, Pmf):
            prefix = "p_" if n_dist == 0 else f"p_{name}_"
            n_dist += 1
            decls.append(PredictionDecl(name, "dist", None, prefix))
        elif isinstance(v, str):
            decls.append(PredictionDecl(name, "token", name))
        else:
            decls.append(PredictionDecl(name, "real", name))
    return decls


def write_csv(dataset: PredictionDataset, path: str | Path, predictions: Sequence[PredictionDecl]) -> None:
    sp = dataset.space
    header = ["x_id", "y", "weight"]
    for p in predictions:
        header += [p.prefix + lab for lab in sp.labels] if p.kind == "dist" else [p.column or p.name]
    groups = list(dataset.group_names)
    header += ["g_" + g for g in groups]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in dataset.records:
            row = [r.x_id, r.y, _g17(r.weight)]
            for p in predictions:
                v = r.preds[p.name]
                if p.kind == "dist":
                    row += [_g17(x) for x in v.weights]
                elif p.kind == "real":
                    row.append(_g17(v))
                else:
                    row.append(v)
            row += [str(r.groups[g]) for g in groups]
            w.writerow(row)


def write_jsonl(dataset: PredictionDataset, path: str | Path, predictions: Sequence[PredictionDecl]) -> None:
    """JSON floats use the shortest round-trip repr, so re-ingestion is
    bit-exact."""
    with open(path, "w") as fh:
        for r in dataset.records:
            preds = {}
            for p in predictions:
                v = r.preds[p.name]
                preds[p.name] = dict(zip(dataset.space.labels, v.weights)) if p.kind == "dist" else v
            obj = {"x_id": r.x_id, "y": r.y, "weight": r.weight, "pred": preds, "groups": dict(r.groups)}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
