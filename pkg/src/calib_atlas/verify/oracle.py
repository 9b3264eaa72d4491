"""Brute-force recomputation of every metric, sharing no code with metrics.

Everything here is plain Python loops over records and grid points. The only
library pieces used are the outcome primitives and the user-supplied loss
and property callables themselves.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from ..errors import MissingIngredient, TooLarge
from ..losses import make_simple_loss, pinball_loss, squared_loss, zero_one_loss
from ..outcomes import OutcomeSpace, Pmf, pmf_new
from ..properties import make_standard_property
from .edges import random_pmf_array
from .scenarios import Scenario, build_dataset

MAX_RECORDS = 10_000
MAX_GRID = 1_000

LEVEL_QUANTITIES = ("vanilla", "distribution", "gamma", "swap")
SCALAR_QUANTITIES = (
    "decision", "bayes_risk", "realized_loss", "cost_gap",
    "expected", "expected_square", "sup", "group", "robust_swap",
)
QUANTITIES = LEVEL_QUANTITIES + SCALAR_QUANTITIES


def _pooled(space: OutcomeSpace, records) -> Pmf:
    mass = {lab: 0.0 for lab in space.labels}
    for r in records:
        mass[r.y] += r.weight
    total = sum(mass.values())
    return pmf_new(space, [mass[lab] / total for lab in space.labels])


def _distance(metric: str, a: Any, b: Any) -> float:
    if metric == "abs_diff":
        return abs(float(a) - float(b))
    if metric == "total_variation":
        return 0.5 * sum(abs(x - y) for x, y in zip(a.weights, b.weights))
    return 0.0 if a == b else 1.0


def _expected(loss, p: Pmf, v) -> float:
    return sum(pr * loss(lab, v) for lab, pr in zip(p.space.labels, p.weights))


def _argmin(loss, p: Pmf, grid) -> tuple[Any, float]:
    best_v, best = None, math.inf
    for v in grid:
        e = _expected(loss, p, v)
        if e < best:
            best_v, best = v, e
    return best_v, best


def _group(records, name):
    out: dict[Any, list] = {}
    for r in records:
        out.setdefault(r.preds[name], []).append(r)
    return out


def _total(records) -> float:
    return sum(r.weight for r in records)


def _check_size(scenario: Scenario) -> None:
    if len(scenario.dataset.records) > MAX_RECORDS:
        raise TooLarge(f"{len(scenario.dataset.records)} records exceeds {MAX_RECORDS}")
    grid = scenario.meta.get("grid")
    if grid is not None and len(grid) > MAX_GRID:
        raise TooLarge(f"grid of {len(grid)} points exceeds {MAX_GRID}")


def _meta(scenario: Scenario, key: str):
    if key not in scenario.meta:
        raise MissingIngredient(f"oracle needs {key!r} in scenario meta")
    return scenario.meta[key]


def _gamma_levels(space, records, name, prop, min_weight, total):
    out = {}
    for level, rs in _group(records, name).items():
        share = _total(rs) / total
        if share <= min_weight:
            continue
        out[level] = _distance(prop.metric, prop.evaluator(_pooled(space, rs)), level)
    return out


def brute_force_levels(scenario: Scenario, quantity: str, min_weight: float = 0.0) -> dict:
    """Per-level residuals for the level quantities, by direct summation."""
    _check_size(scenario)
    ds = scenario.dataset
    recs, sp = list(ds.records), ds.space
    total = _total(recs)
    if quantity == "vanilla":
        out = {}
        for level, rs in _group(recs, _meta(scenario, "pred")).items():
            w = _total(rs)
            if w / total <= min_weight:
                continue
            ones = sum(r.weight for r in rs if sp.value(r.y) == 1.0)
            out[level] = abs(ones / w - level)
        return out
    if quantity == "distribution":
        prop = _meta(scenario, "gamma_dist")
        name = _meta(scenario, "dist_pred")
        buckets: dict[Any, list] = {}
        for r in recs:
            buckets.setdefault(prop.evaluator(r.preds[name]), []).append(r)
        out = {}
        for level, rs in buckets.items():
            w = _total(rs)
            if w / total <= min_weight:
                continue
            worst = 0.0
            for lab in sp.labels:
                hit = sum(r.weight for r in rs if r.y == lab)
                fc = sum(r.weight * r.preds[name][lab] for r in rs)
                worst = max(worst, abs(hit - fc) / w)
            out[level] = worst
        return out
    if quantity == "gamma":
        return _gamma_levels(sp, recs, _meta(scenario, "value_pred"), _meta(scenario, "gamma"),
                             min_weight, total)
    if quantity == "swap":
        loss, grid = _meta(scenario, "loss"), _meta(scenario, "grid")
        out = {}
        for level, rs in _group(recs, _meta(scenario, "act_pred")).items():
            w = _total(rs)
            if w / total <= min_weight:
                continue
            incurred = sum(r.weight * loss(r.y, level) for r in rs) / w
            best = min(sum(r.weight * loss(r.y, v) for r in rs) / w for v in grid)
            out[level] = max(incurred - best, 0.0)
        return out
    raise ValueError(f"{quantity!r} is not a level quantity")


def brute_force_oracle(scenario: Scenario, quantity: str, min_weight: float = 0.0) -> float:
    """One real number per quantity: the sup over levels for level maps,
    the scalar value otherwise."""
    if quantity in LEVEL_QUANTITIES:
        levels = brute_force_levels(scenario, quantity, min_weight)
        return max(levels.values()) if levels else 0.0
    _check_size(scenario)
    ds = scenario.dataset
    recs, sp = list(ds.records), ds.space
    total = _total(recs)
    if quantity == "decision":
        loss, grid, name = _meta(scenario, "loss"), _meta(scenario, "grid"), _meta(scenario, "dist_pred")
        s = 0.0
        for r in recs:
            act, own = _argmin(loss, r.preds[name], grid)
            s += r.weight * (loss(r.y, act) - own)
        return abs(s / total)
    if quantity == "bayes_risk":
        loss = _meta(scenario, "loss")
        g, h = _meta(scenario, "decision_pred"), _meta(scenario, "risk_pred")
        s = sum(r.weight * (loss(r.y, r.preds[g]) - float(r.preds[h])) for r in recs)
        return abs(s / total)
    if quantity in ("realized_loss", "cost_gap"):
        name = _meta(scenario, "dist_pred")

        def realized(loss, grid):
            return sum(r.weight * loss(r.y, _argmin(loss, r.preds[name], grid)[0]) for r in recs) / total

        first = realized(_meta(scenario, "loss"), _meta(scenario, "grid"))
        if quantity == "realized_loss":
            return first
        return abs(first - realized(*_meta(scenario, "second")))
    if quantity in ("expected", "expected_square", "sup"):
        lv = _gamma_levels(sp, recs, _meta(scenario, "value_pred"), _meta(scenario, "gamma"), 0.0, total)
        shares = {k: _total(rs) / total for k, rs in _group(recs, _meta(scenario, "value_pred")).items()}
        if quantity == "sup":
            return max(lv.values())
        power = 1 if quantity == "expected" else 2
        return sum(shares[k] * lv[k] ** power for k in lv) / sum(shares[k] for k in lv)
    if quantity == "group":
        gname, prop, name = _meta(scenario, "group"), _meta(scenario, "gamma"), _meta(scenario, "value_pred")
        vals = []
        for flag in (1, 0):
            part = [r for r in recs if r.groups[gname] == flag]
            if part:
                vals.append(max(_gamma_levels(sp, part, name, prop, 0.0, _total(part)).values()))
        return max(vals)
    if quantity == "robust_swap":
        loss, grid = _meta(scenario, "loss"), _meta(scenario, "grid")
        name = _meta(scenario, "act_pred")
        best_scaled = 0.0
        for gname in _meta(scenario, "groups"):
            part = [r for r in recs if r.groups[gname] == 1]
            wg = _total(part)
            gap = 0.0
            for level, rs in _group(part, name).items():
                w = _total(rs)
                incurred = sum(r.weight * loss(r.y, level) for r in rs) / w
                best = min(sum(r.weight * loss(r.y, v) for r in rs) / w for v in grid)
                gap += (w / wg) * max(incurred - best, 0.0)
            best_scaled = max(best_scaled, gap * wg / total)
        return best_scaled
    raise ValueError(f"unknown oracle quantity {quantity!r}")


def generic_scenario(rng: np.random.Generator, binary: bool | None = None) -> Scenario:
    """Small random scenario carrying every ingredient the oracle knows.

    Forecasts are drawn from short pools so levels repeat; outcome
    conditionals are unrelated to the forecasts, so residuals are generic.
    """
    if binary is None:
        binary = bool(rng.uniform() < 0.5)
    k = 2 if binary else int(rng.integers(3, 5))
    sp = OutcomeSpace.binary() if binary else OutcomeSpace(
        tuple(str(i) for i in range(k)), tuple(float(i) for i in range(k)))
    prob_pool = [float(v) for v in rng.integers(0, 65, size=int(rng.integers(2, 6))) / 64.0]
    dist_pool = [pmf_new(sp, random_pmf_array(rng, k)) for _ in range(int(rng.integers(2, 6)))]
    value_pool = [float(v) for v in rng.uniform(0.0, k - 1.0, size=int(rng.integers(2, 6)))]
    fam = str(rng.choice(["zero_one", "squared", "pinball", "simple"] if binary else
                         ["zero_one", "squared", "pinball"]))
    if fam == "zero_one":
        loss = zero_one_loss(sp)
        grid, act_pool = loss.grid, list(sp.labels)
    elif fam == "simple":
        loss, _ = make_simple_loss(float(rng.uniform(0.1, 0.9)), sp)
        grid, act_pool = loss.grid, list(loss.grid)
    else:
        loss = squared_loss(sp) if fam == "squared" else pinball_loss(sp, float(rng.uniform(0.1, 0.9)))
        grid = tuple(float(v) for v in np.linspace(0.0, k - 1.0, int(rng.integers(5, 41))))
        grid = tuple(sorted(set(grid) | set(value_pool)))
        act_pool = value_pool
    second = squared_loss(sp, 2.0)
    second_grid = tuple(float(v) for v in np.linspace(0.0, k - 1.0, 11))
    n_x = int(rng.integers(4, 16))
    blocks = []
    for i in range(n_x):
        preds = {
            "pred": prob_pool[int(rng.integers(len(prob_pool)))] if binary else 0.5,
            "dist_pred": dist_pool[int(rng.integers(len(dist_pool)))],
            "value_pred": value_pool[int(rng.integers(len(value_pool)))],
            "act_pred": act_pool[int(rng.integers(len(act_pool)))],
            "risk_pred": float(rng.uniform(0.0, 1.0)),
        }
        groups = {"g1": int(i % 2 == 0), "g2": int(rng.uniform() < 0.5) if i > 0 else 1}
        blocks.append((f"x{i}", float(rng.integers(1, 9)) / 8.0, random_pmf_array(rng, k), preds, groups))
    ds = build_dataset(sp, blocks)
    gamma_dist = make_standard_property(str(rng.choice(["mode", "mean"])), sp)
    meta = {
        "pred": "pred", "dist_pred": "dist_pred", "value_pred": "value_pred",
        "act_pred": "act_pred", "decision_pred": "act_pred", "risk_pred": "risk_pred",
        "loss": loss, "grid": grid, "second": (second, second_grid),
        "gamma": make_standard_property("mean", sp), "gamma_dist": gamma_dist,
        "group": "g1", "groups": ("g1", "g2"), "binary": binary,
    }
    return Scenario(ds, {}, {"loss": loss}, {}, meta, f"generic[{'binary' if binary else k}]")
