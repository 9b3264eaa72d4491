"""Calibration diagnostics on empirical joint distributions.

Every level-wise metric returns a :class:`LevelResidualMap` whose entries
carry the level value, its share of the dataset weight and a non-negative
residual. Scalar metrics return :class:`ScalarResidual` with the signed value
kept alongside the absolute one.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    EmptyDataset,
    EmptyGroup,
    EmptyMap,
    KindMismatch,
    MissingDistPrediction,
    MissingPrediction,
    NotBinary,
)
from .losses import LossFn, best_response, expected_loss, loss_matrix
from .outcomes import Pmf, PredictionDataset, value_sort_key
from .properties import Property, check_value_kind, value_distance

AGGREGATION_MODES = ("expected", "expected_square", "sup")


@dataclass(frozen=True)
class LevelEntry:
    level: Any
    weight: float
    residual: float
    observed: Any = None
    predicted: Any = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LevelResidualMap:
    entries: tuple[LevelEntry, ...]
    metric_name: str
    skipped: tuple = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def residuals(self) -> dict:
        return {e.level: e.residual for e in self.entries}

    def max(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    def entry(self, level: Any) -> LevelEntry:
        for e in self.entries:
            if e.level == level:
                return e
        raise KeyError(level)


@dataclass(frozen=True)
class ScalarResidual:
    value: float
    signed: float


@dataclass
class CalibrationReport:
    per_metric: dict = field(default_factory=dict)
    aggregates: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# helpers


def _levels(
    dataset: PredictionDataset,
    name: str,
    key: Callable[[Any], Any] | None = None,
) -> dict[Any, np.ndarray]:
    """Record indices grouped by ``key(prediction)`` in sorted key order."""
    if not dataset.records:
        raise EmptyDataset("empty dataset")
    if key is None:
        return dataset.levels(name)
    cache: dict = {}
    buckets: dict[Any, list[int]] = {}
    for i, v in enumerate(dataset.values(name)):
        if v not in cache:
            cache[v] = key(v)
        buckets.setdefault(cache[v], []).append(i)
    return {k: np.asarray(buckets[k]) for k in sorted(buckets, key=value_sort_key)}


def _dist_values(dataset: PredictionDataset, name: str) -> list[Pmf]:
    try:
        vals = dataset.values(name)
    except MissingPrediction:
        raise MissingDistPrediction(f"no distributional prediction named {name!r}") from None
    if not all(isinstance(v, Pmf) for v in vals):
        raise MissingDistPrediction(f"prediction {name!r} is not distribution-valued")
    return vals


def _share(dataset: PredictionDataset, idx: np.ndarray) -> float:
    return float(dataset.weights[idx].sum() / dataset.total_weight)


def _finish(entries, name, dataset, min_weight) -> LevelResidualMap:
    kept = tuple(e for e in entries if e.weight > min_weight)
    skipped = tuple(e.level for e in entries if e.weight <= min_weight)
    return LevelResidualMap(kept, name, skipped)


def _binary_values(dataset: PredictionDataset) -> np.ndarray:
    sp = dataset.space
    if len(sp) != 2 or sp.embedding is None or tuple(sp.embedding) != (0.0, 1.0):
        raise NotBinary("vanilla calibration needs outcomes embedded as {0, 1}")
    return sp.values


# ---------------------------------------------------------------------------
# level metrics


def vanilla_calibration(
    dataset: PredictionDataset,
    prediction_name: str,
    bin_width: float | None = None,
    min_weight: float = 0.0,
) -> LevelResidualMap:
    """|E[Y | f = g] - g| per predicted probability g.

    With ``bin_width`` the levels are half-open bins [k w, (k+1) w) keyed by
    their left edge, and the residual compares the bin's outcome rate with its
    weighted mean prediction.
    """
    y = _binary_values(dataset)
    vals = dataset.values(prediction_name)
    for v in vals:
        if isinstance(v, (str, tuple, Pmf)) or not 0.0 <= v <= 1.0:
            raise KindMismatch(f"{prediction_name}: vanilla calibration needs probabilities in [0, 1]")
    key = None
    if bin_width is not None:
        if not bin_width > 0:
            raise ValueError("bin width must be positive")
        key = lambda v: math.floor(v / bin_width) * bin_width  # noqa: E731
    entries = []
    pv = np.asarray(vals, dtype=float)
    for level, idx in _levels(dataset, prediction_name, key).items():
        w = dataset.weights[idx]
        obs = float(np.dot(w, y[dataset.y_index[idx]]) / w.sum())
        pred = float(level) if key is None else float(np.dot(w, pv[idx]) / w.sum())
        entries.append(LevelEntry(level, _share(dataset, idx), abs(obs - pred), obs, pred))
    return _finish(entries, "vanilla", dataset, min_weight)


def distribution_calibration(
    dataset: PredictionDataset,
    dist_prediction_name: str,
    prop: Property,
    min_weight: float = 0.0,
) -> LevelResidualMap:
    """Worst-component gap between pooled outcomes and averaged forecasts on
    each level of Gamma o f. Per-component gaps are kept in ``extra``."""
    preds = _dist_values(dataset, dist_prediction_name)
    entries = []
    for level, idx in _levels(dataset, dist_prediction_name, prop.evaluator).items():
        w = dataset.weights[idx]
        pooled = dataset.outcome_pmf(idx)
        avg = (w @ np.vstack([preds[i].array for i in idx])) / w.sum()
        signed = pooled.array - avg
        comp = np.abs(signed)
        entries.append(LevelEntry(
            level, _share(dataset, idx), float(comp.max()),
            pooled.weights, tuple(float(a) for a in avg),
            {"components": tuple(float(c) for c in comp), "signed": tuple(float(c) for c in signed)},
        ))
    return _finish(entries, f"distribution[{prop.name}]", dataset, min_weight)


def gamma_calibration(
    dataset: PredictionDataset,
    prediction_name: str,
    prop: Property,
    min_weight: float = 0.0,
) -> LevelResidualMap:
    """m(Gamma(D_{Y | f = g}), g) per predicted value g."""
    entries = []
    for level, idx in _levels(dataset, prediction_name).items():
        check_value_kind(prop.kind, level)
        pooled = dataset.outcome_pmf(idx)
        realized = prop(pooled)
        entries.append(LevelEntry(
            level, _share(dataset, idx), value_distance(prop.metric, realized, level),
            realized, level,
        ))
    return _finish(entries, f"gamma[{prop.name}]", dataset, min_weight)


def swap_regret(
    dataset: PredictionDataset,
    prediction_name: str,
    loss: LossFn,
    grid: Sequence[Any],
    min_weight: float = 0.0,
) -> LevelResidualMap:
    """Per level g: E[l(Y, g) | f = g] minus the best grid value's conditional
    risk, clipped at zero (the unclipped gap is kept in ``extra``)."""
    grid = tuple(grid)
    entries = []
    for level, idx in _levels(dataset, prediction_name).items():
        pooled = dataset.outcome_pmf(idx)
        incurred = expected_loss(loss, pooled, level)
        act, best = best_response(loss, pooled, grid)
        raw = incurred - best
        entries.append(LevelEntry(
            level, _share(dataset, idx), max(raw, 0.0), best, incurred,
            {"signed": raw, "best_response": act},
        ))
    return _finish(entries, f"swap[{loss.name}]", dataset, min_weight)


# ---------------------------------------------------------------------------
# scalar metrics


def _named_losses(losses) -> list[tuple[str, LossFn, tuple]]:
    if isinstance(losses, Mapping):
        items = [(k, lg[0], tuple(lg[1])) for k, lg in losses.items()]
    else:
        items = []
        seen: dict[str, int] = {}
        for loss, grid in losses:
            n = loss.name
            if n in seen:
                seen[n] += 1
                n = f"{n}#{seen[n]}"
            else:
                seen[n] = 0
            items.append((n, loss, tuple(grid)))
    return items


def decision_calibration(
    dataset: PredictionDataset,
    dist_prediction_name: str,
    losses,
) -> dict[str, ScalarResidual]:
    """Realized minus self-estimated loss of each forecast's Bayes act.

    ``losses`` is a sequence of ``(loss, grid)`` pairs or a name -> pair
    mapping. The act and the forecaster's own risk estimate are the
    best response on the predicted Pmf.
    """
    preds = _dist_values(dataset, dist_prediction_name)
    w = dataset.weights
    yi = dataset.y_index
    out = {}
    for name, loss, grid in _named_losses(losses):
        mat = loss_matrix(loss, grid)
        cache: dict[Pmf, tuple[int, float]] = {}
        diff = np.empty(len(preds))
        for i, p in enumerate(preds):
            if p not in cache:
                risks = p.array @ mat
                j = int(np.argmin(risks))
                cache[p] = (j, float(risks[j]))
            j, own = cache[p]
            diff[i] = mat[yi[i], j] - own
        signed = float(np.dot(w, diff) / w.sum())
        out[name] = ScalarResidual(abs(signed), signed)
    return out


def bayes_risk_estimation_residual(
    dataset: PredictionDataset,
    decision_prediction_name: str,
    risk_prediction_name: str,
    loss: LossFn,
) -> ScalarResidual:
    """E[l(Y, g(X)) - h(X)] for a decision predictor g and a risk predictor h."""
    g = dataset.values(decision_prediction_name)
    h = dataset.values(risk_prediction_name)
    terms = np.array([loss(r.y, gv) - float(hv) for r, gv, hv in zip(dataset.records, g, h)])
    signed = float(np.dot(dataset.weights, terms) / dataset.total_weight)
    return ScalarResidual(abs(signed), signed)


def realized_decision_loss(
    dataset: PredictionDataset,
    dist_prediction_name: str,
    loss: LossFn,
    grid: Sequence[Any],
) -> float:
    """E[l(Y, Phi_l(f(X)))]: average loss of acting on each forecast."""
    preds = _dist_values(dataset, dist_prediction_name)
    grid = tuple(grid)
    acts: dict[Pmf, Any] = {}
    total = 0.0
    for r, p in zip(dataset.records, preds):
        if p not in acts:
            acts[p] = best_response(loss, p, grid)[0]
        total += r.weight * loss(r.y, acts[p])
    return total / dataset.total_weight


def cost_gap(dataset: PredictionDataset, dist_prediction_name: str, first, second) -> float:
    """|realized loss of one decision maker - that of another|, each given as
    a ``(loss, grid)`` pair acting on the same forecasts."""
    a = realized_decision_loss(dataset, dist_prediction_name, *first)
    b = realized_decision_loss(dataset, dist_prediction_name, *second)
    return abs(a - b)


def aggregate(residual_map: LevelResidualMap, mode: str) -> float:
    """Event-weighted mean, weighted mean of squares, or max of residuals.

    Weights are renormalized over the levels present, so a group-restricted
    map aggregates as a conditional expectation.
    """
    if not residual_map.entries:
        raise EmptyMap(f"{residual_map.metric_name}: no levels to aggregate")
    r = np.array([e.residual for e in residual_map.entries])
    w = np.array([e.weight for e in residual_map.entries])
    if mode == "expected":
        return float(np.dot(w, r) / w.sum())
    if mode == "expected_square":
        return float(np.dot(w, r * r) / w.sum())
    if mode == "sup":
        return float(r.max())
    raise ValueError(f"unknown aggregation mode {mode!r}")


# ---------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class GroupReport:
    group: str
    inside: Any
    complement: Any
    sup: float


def _group_value(result: Any, mode: str) -> float:
    if isinstance(result, LevelResidualMap):
        return aggregate(result, mode)
    if isinstance(result, ScalarResidual):
        return result.value
    if isinstance(result, Mapping):
        return max(_group_value(v, mode) for v in result.values())
    return float(result)


def group_metric(
    dataset: PredictionDataset,
    group_name: str,
    metric_closure: Callable[[PredictionDataset], Any],
    mode: str = "sup",
) -> GroupReport:
    """Run ``metric_closure`` on the group (flag 1) and on its complement.

    ``sup`` is the larger of the two aggregated results; the complement is
    None when the group covers every record.
    """
    inside = metric_closure(dataset.restrict(group_name, 1))
    try:
        outside = metric_closure(dataset.restrict(group_name, 0))
    except EmptyGroup:
        outside = None
    vals = [_group_value(inside, mode)]
    if outside is not None:
        vals.append(_group_value(outside, mode))
    return GroupReport(group_name, inside, outside, max(vals))


def multigroup_metric(
    dataset: PredictionDataset,
    group_names: Iterable[str],
    metric_closure: Callable[[PredictionDataset], Any],
    mode: str = "sup",
) -> tuple[dict[str, GroupReport], float]:
    reports = {g: group_metric(dataset, g, metric_closure, mode) for g in group_names}
    if not reports:
        raise EmptyGroup("no groups given")
    return reports, max(r.sup for r in reports.values())


@dataclass(frozen=True)
class RobustSwapResult:
    value: float
    conditional: float
    per_group: dict


def robust_swap_regret(
    dataset: PredictionDataset,
    prediction_name: str,
    loss: LossFn,
    groups: Sequence[str],
    grid: Sequence[Any],
) -> RobustSwapResult:
    """Group-robust swap regret of a real-valued predictor.

    For each group c the comparator may reassign every level of f inside the
    group to its own best grid value (or keep it). ``conditional`` is the
    largest gap in E[l(Y, .) | c = 1]; ``value`` is the largest gap scaled by
    the group's weight share E[c(X)], the quantity bounded by beta.
    """
    if not groups:
        raise EmptyGroup("no groups given")
    grid = tuple(grid)
    per = {}
    for g in groups:
        sub = dataset.restrict(g, 1)
        share = sub.total_weight / dataset.total_weight
        gap = 0.0
        for level, idx in sub.levels(prediction_name).items():
            pooled = sub.outcome_pmf(idx)
            incurred = expected_loss(loss, pooled, level)
            _, best = best_response(loss, pooled, grid)
            lw = float(sub.weights[idx].sum() / sub.total_weight)
            gap += lw * (incurred - min(best, incurred))
        per[g] = {"conditional": gap, "scaled": share * gap, "share": share}
    return RobustSwapResult(
        max(v["scaled"] for v in per.values()),
        max(v["conditional"] for v in per.values()),
        per,
    )
