"""Seeded suites over edges, counterexamples and oracle cross-checks.

Every scenario gets its own generator seeded from (seed, suite item, index),
so results do not depend on execution order and any subset can be rerun
alone.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
import numpy as np

from ..metrics import (
    aggregate,
    bayes_risk_estimation_residual,
    cost_gap,
    decision_calibration,
    distribution_calibration,
    gamma_calibration,
    group_metric,
    realized_decision_loss,
    robust_swap_regret,
    swap_regret,
    vanilla_calibration,
)
from ..serialize import dumps
from .edges import EDGES, check_edge
from .oracle import LEVEL_QUANTITIES, QUANTITIES, brute_force_levels, brute_force_oracle, generic_scenario
from .recovery import recover_distribution_calibration, recovery_scenario
from .scenarios import Scenario, counterexample_suite

log = logging.getLogger(__name__)

SUITES = ("edges", "counterexamples", "oracles", "all")
ORACLE_TOL = 1e-12
RECOVERY_EPSILON = 0.02


@dataclass
class SuiteReport:
    suite: str
    seed: int
    rows: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def summary(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for r in self.rows:
            s = out.setdefault(r["check"], {"total": 0, "failed": 0})
            s["total"] += 1
            s["failed"] += 0 if r["pass"] else 1
        return out

    def manifest(self) -> str:
        """Canonical JSON: sorted keys, 17-digit floats, no timestamps."""
        body = {
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "summary": self.summary(),
            "rows": self.rows,
        }
        return dumps(body)


def _clean(v: float) -> float | str:
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def scenario_rng(seed: int, item: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, item, index]))


def metric_value(scenario: Scenario, quantity: str, min_weight: float = 0.0):
    """The metrics-module route for each oracle quantity (same return shape
    as the oracle: level dict or scalar)."""
    ds, m = scenario.dataset, scenario.meta
    if quantity == "vanilla":
        return vanilla_calibration(ds, m["pred"], min_weight=min_weight).residuals()
    if quantity == "distribution":
        return distribution_calibration(ds, m["dist_pred"], m["gamma_dist"], min_weight).residuals()
    if quantity == "gamma":
        return gamma_calibration(ds, m["value_pred"], m["gamma"], min_weight).residuals()
    if quantity == "swap":
        return swap_regret(ds, m["act_pred"], m["loss"], m["grid"], min_weight).residuals()
    if quantity == "decision":
        return next(iter(decision_calibration(ds, m["dist_pred"], [(m["loss"], m["grid"])]).values())).value
    if quantity == "bayes_risk":
        return bayes_risk_estimation_residual(ds, m["decision_pred"], m["risk_pred"], m["loss"]).value
    if quantity == "realized_loss":
        return realized_decision_loss(ds, m["dist_pred"], m["loss"], m["grid"])
    if quantity == "cost_gap":
        return cost_gap(ds, m["dist_pred"], (m["loss"], m["grid"]), m["second"])
    if quantity in ("expected", "expected_square", "sup"):
        return aggregate(gamma_calibration(ds, m["value_pred"], m["gamma"]), quantity)
    if quantity == "group":
        return group_metric(ds, m["group"], lambda d: gamma_calibration(d, m["value_pred"], m["gamma"])).sup
    if quantity == "robust_swap":
        return robust_swap_regret(ds, m["act_pred"], m["loss"], m["groups"], m["grid"]).value
    raise ValueError(f"unknown quantity {quantity!r}")


def oracle_gap(scenario: Scenario, quantity: str) -> float:
    """Largest disagreement between the metric and the brute-force oracle."""
    got = metric_value(scenario, quantity)
    if quantity in LEVEL_QUANTITIES:
        want = brute_force_levels(scenario, quantity)
        if set(got) != set(want):
            return math.inf
        return max((abs(got[k] - want[k]) for k in got), default=0.0)
    return abs(got - brute_force_oracle(scenario, quantity))


def oracle_scenarios(seed: int, quantity: str, n: int) -> Iterable[Scenario]:
    """n scenarios to which ``quantity`` applies (binary-only for vanilla)."""
    item = 100 + QUANTITIES.index(quantity)
    for i in range(n):
        rng = scenario_rng(seed, item, i)
        yield generic_scenario(rng, binary=True if quantity == "vanilla" else None)


def run_edges(
    seed: int,
    n_per_edge: int = 200,
    edges: Iterable[str] | None = None,
    bound_scale: float = 1.0,
) -> list[dict]:
    rows = []
    for idx, name in enumerate(EDGES):
        if edges is not None and name not in edges:
            continue
        for i in range(n_per_edge):
            s = EDGES[name].generate(scenario_rng(seed, idx, i))
            r = check_edge(name, s, bound_scale)
            rows.append({
                "check": f"edge:{name}", "index": i, "scenario": s.name,
                "hypothesis_met": r.hypothesis_met, "pass": r.hypothesis_met and r.conclusion_holds,
                "slack": _clean(r.slack), "bound": _clean(r.bound), "residual": _clean(r.residual),
            })
        log.info("edge %s: %d scenarios", name, n_per_edge)
    return rows


def run_recovery(seed: int, n: int = 20) -> list[dict]:
    rows = []
    item = len(EDGES)
    for i in range(n):
        clean = recovery_scenario(scenario_rng(seed, item, i))
        bad = recovery_scenario(scenario_rng(seed, item, i), perturb=0.1)
        rc = recover_distribution_calibration(clean, RECOVERY_EPSILON)
        rb = recover_distribution_calibration(bad, RECOVERY_EPSILON)
        detected = rb.recovered and not rb.binary_ok and rb.flagged == [bad.meta["perturbed"]]
        rows.append({
            "check": "edge:recovery", "index": i, "scenario": clean.name,
            "hypothesis_met": True, "pass": rc.recovered and rc.binary_ok and detected,
            "clean_full_residual": _clean(rc.full_residual),
            "perturbed_full_residual": _clean(rb.full_residual), "detected": detected,
        })
    return rows


def run_counterexamples() -> list[dict]:
    rows = []
    for s in counterexample_suite():
        for row in s.check():
            rows.append({
                "check": "counterexample", "scenario": s.name, "expectation": row["name"],
                "quantity": row["quantity"],
                "expected": _clean(row["expected"]), "measured": _clean(row["measured"]),
                "pass": bool(row["pass"]),
            })
    return rows


def run_oracles(seed: int, n_per_metric: int = 100) -> list[dict]:
    rows = []
    for q in QUANTITIES:
        for i, s in enumerate(oracle_scenarios(seed, q, n_per_metric)):
            gap = oracle_gap(s, q)
            rows.append({"check": f"oracle:{q}", "index": i, "scenario": s.name,
                         "gap": _clean(gap), "pass": gap <= ORACLE_TOL})
    return rows


def run_suite(
    suite: str,
    seed: int = 0,
    n_per_edge: int = 200,
    n_oracle: int = 100,
    bound_scale: float = 1.0,
) -> SuiteReport:
    """Run one suite. ``bound_scale`` != 1 tampers with every edge bound
    (fault injection for tests)."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
    rep = SuiteReport(suite, seed)
    if suite in ("edges", "all"):
        rep.rows += run_edges(seed, n_per_edge, bound_scale=bound_scale)
        rep.rows += run_recovery(seed)
    if suite in ("counterexamples", "all"):
        rep.rows += run_counterexamples()
    if suite in ("oracles", "all"):
        rep.rows += run_oracles(seed, n_oracle)
    return rep
