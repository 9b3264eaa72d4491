"""Exact synthetic scenarios and the worked counterexamples.

A scenario is a weighted dataset with the properties, losses and named
ingredients (prediction names, grids, groups) needed to evaluate some
metrics, plus the values those metrics are expected to take.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import nnls

from ..errors import BadParam, MissingIngredient, Unrealizable
from ..losses import LossFn, best_response, make_simple_loss, squared_loss
from ..metrics import (
    bayes_risk_estimation_residual,
    cost_gap,
    decision_calibration,
    gamma_calibration,
    vanilla_calibration,
)
from ..outcomes import OutcomeSpace, Pmf, PredictionDataset, Record, pmf_new
from ..properties import Property, make_standard_property


@dataclass(frozen=True)
class Expectation:
    """A metric value a scenario is built to produce.

    ``quantity`` names the metric operation; ``compute`` evaluates it on the
    scenario; ``basis`` says where ``value`` comes from (closed form, hand
    count, construction).
    """

    quantity: str
    value: float
    tol: float
    basis: str
    compute: Callable[[Scenario], float]


@dataclass(frozen=True, eq=False)
class Scenario:
    dataset: PredictionDataset
    properties: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    name: str = "scenario"

    def need(self, *keys: str) -> tuple:
        """Fetch ingredients from ``meta``, raising MissingIngredient."""
        missing = [k for k in keys if k not in self.meta]
        if missing:
            raise MissingIngredient(f"{self.name}: missing {', '.join(missing)}")
        return tuple(self.meta[k] for k in keys)

    def check(self) -> list[dict]:
        """Evaluate every expectation; one row per expected quantity."""
        rows = []
        for key in sorted(self.expected):
            exp = self.expected[key]
            got = float(exp.compute(self))
            err = abs(got - exp.value)
            rows.append({
                "name": key,
                "quantity": exp.quantity,
                "expected": exp.value,
                "measured": got,
                "tol": exp.tol,
                "error": err,
                "pass": bool(err <= exp.tol),
            })
        return rows


def build_dataset(
    space: OutcomeSpace,
    blocks: Sequence[tuple[str, float, Any, dict, dict]],
    name: str = "scenario",
) -> PredictionDataset:
    """Exact dataset from ``(x_id, weight, conditional, preds, groups)`` blocks.

    Each block becomes one record per outcome carrying ``weight * P(y)``;
    zero-mass outcomes are dropped.
    """
    recs = []
    for x_id, w, cond, preds, groups in blocks:
        probs = cond.weights if isinstance(cond, Pmf) else tuple(float(c) for c in cond)
        for lab, pr in zip(space.labels, probs):
            mass = w * pr
            if mass > 0:
                recs.append(Record(str(x_id), lab, dict(preds), dict(groups), float(mass)))
    return PredictionDataset(space, tuple(recs), name)


def binary_pmf(space: OutcomeSpace, p1: float) -> Pmf:
    return pmf_new(space, [1.0 - p1, p1])


# ---------------------------------------------------------------------------
# counterexamples


def counterexample_half_predictor(p_bar: float, n_levels_x: int = 4) -> Scenario:
    """Binary outcomes, f = 1/2 everywhere, conditional rates averaging ``p_bar``.

    Under squared loss the act 1/2 has loss 1/4 whatever the outcome, so the
    forecast's self-estimate is always exact while its mean is off by
    |p_bar - 1/2|.
    """
    if not 0.0 < p_bar < 1.0:
        raise BadParam(f"p_bar must lie in (0, 1), got {p_bar}")
    if n_levels_x < 1:
        raise BadParam("need at least one input")
    space = OutcomeSpace.binary()
    half = binary_pmf(space, 0.5)
    spread = min(p_bar, 1.0 - p_bar)
    n = n_levels_x
    offsets = [0.0] if n == 1 else [spread * (2 * k / (n - 1) - 1) for k in range(n)]
    blocks = [
        (f"x{k}", 1.0 / n, (1.0 - (p_bar + o), p_bar + o), {"pred": 0.5, "dist_pred": half}, {})
        for k, o in enumerate(offsets)
    ]
    ds = build_dataset(space, blocks, f"half_predictor({p_bar:g})")
    sq = squared_loss(space)
    grid = tuple(np.round(np.linspace(0.0, 1.0, 101), 12))
    expected = {
        "decision_beta_squared": Expectation(
            "decision_calibration[squared]", 0.0, 1e-12, "closed form: act 1/2 costs 1/4 for both outcomes",
            lambda s: decision_calibration(s.dataset, "dist_pred", [(sq, grid)])["squared"].value,
        ),
        "vanilla_residual": Expectation(
            "vanilla_calibration@0.5", abs(p_bar - 0.5), 1e-12, "closed form |p_bar - 1/2|",
            lambda s: vanilla_calibration(s.dataset, "pred").entry(0.5).residual,
        ),
    }
    return Scenario(
        ds, {"mean": make_standard_property("mean", space)}, {"squared": sq}, expected,
        {"pred": "pred", "dist_pred": "dist_pred", "grid": grid, "p_bar": p_bar},
        ds.name,
    )


def _solve_moments(support: np.ndarray, mean: float, second: float) -> np.ndarray:
    """Non-negative weights on ``support`` with unit mass and given moments."""
    a = np.vstack([np.ones_like(support), support, support**2])
    b = np.array([1.0, mean, second])
    x, res = nnls(a, b)
    if res > 1e-10:
        raise Unrealizable(
            f"no distribution on {support.tolist()} has mean {mean} and second moment {second}"
        )
    x[x < 1e-15] = 0.0
    return x / x.sum()


def counterexample_mean_variance(
    v: float,
    grid_size: int = 4,
    marginal: tuple[float, float] = (0.5, 0.5),
) -> Scenario:
    """Two inputs with conditional means 1 and 0 and common second moment
    ``v``; the mean forecast swaps them (0, 1) and the risk forecast is
    (v, v + 1).

    Outcomes live on the integer grid -1, 0, ..., grid_size - 2. The pair is
    a precise Bayes risk estimator for squared loss, yet neither forecast is
    calibrated for its property.
    """
    if grid_size < 3:
        raise BadParam("grid_size must be at least 3")
    if len(marginal) != 2 or min(marginal) <= 0 or abs(sum(marginal) - 1) > 1e-12:
        raise BadParam("marginal must be two positive weights summing to one")
    ys = np.arange(-1, grid_size - 1, dtype=float)
    space = OutcomeSpace.numeric(ys)
    c1 = _solve_moments(ys, 1.0, v)
    c2 = _solve_moments(ys, 0.0, v)
    blocks = [
        ("x1", marginal[0], pmf_new(space, c1), {"mean_pred": 0.0, "var_pred": float(v)}, {}),
        ("x2", marginal[1], pmf_new(space, c2), {"mean_pred": 1.0, "var_pred": float(v) + 1.0}, {}),
    ]
    ds = build_dataset(space, blocks, f"mean_variance({v:g})")
    sq = squared_loss(space)
    mean = make_standard_property("mean", space)
    var = make_standard_property("variance", space)
    expected = {
        "bayes_risk_residual": Expectation(
            "bayes_risk_estimation_residual[squared]", 0.0, 1e-9,
            "closed form: each input's term cancels",
            lambda s: bayes_risk_estimation_residual(s.dataset, "mean_pred", "var_pred", sq).value,
        ),
        "variance_residual_at_v": Expectation(
            "gamma_calibration[variance]@v", 1.0, 1e-9, "closed form |(v - 1) - v|",
            lambda s: gamma_calibration(s.dataset, "var_pred", var).entry(float(v)).residual,
        ),
        "variance_residual_at_v_plus_1": Expectation(
            "gamma_calibration[variance]@v+1", 1.0, 1e-9, "closed form |v - (v + 1)|",
            lambda s: gamma_calibration(s.dataset, "var_pred", var).entry(float(v) + 1.0).residual,
        ),
        "mean_residual_at_0": Expectation(
            "gamma_calibration[mean]@0", 1.0, 1e-9, "closed form |1 - 0|",
            lambda s: gamma_calibration(s.dataset, "mean_pred", mean).entry(0.0).residual,
        ),
        "mean_residual_at_1": Expectation(
            "gamma_calibration[mean]@1", 1.0, 1e-9, "closed form |0 - 1|",
            lambda s: gamma_calibration(s.dataset, "mean_pred", mean).entry(1.0).residual,
        ),
    }
    return Scenario(
        ds, {"mean": mean, "variance": var}, {"squared": sq}, expected,
        {"decision_pred": "mean_pred", "risk_pred": "var_pred", "v": float(v),
         "conditionals": (tuple(c1), tuple(c2))},
        ds.name,
    )


def cost_parity_q(c: float, d: float) -> float:
    return 1.0 / ((1.0 - c) / d + 1.0)


def cost_parity_construction(c: float, d: float, f_mid: float) -> Scenario:
    """Calibrated forecasts serving two simple-loss decision makers unequally.

    Outcomes are i.i.d. with P(Y=1) = q = 1 / ((1-c)/d + 1), which equalizes
    the two Bayes risks. Negatives are forecast ``f_mid``; positives get
    ``f_mid`` with probability x = (1-q) f / (q (1-f)) and 1 otherwise, so
    both forecast levels are calibrated. The randomization is written out as
    exact record weights.
    """
    if not 0.0 < d < c < 1.0:
        raise BadParam(f"need 0 < d < c < 1, got c={c}, d={d}")
    q = cost_parity_q(c, d)
    f = float(f_mid)
    if not d < f < q:
        raise BadParam(f"need d < f_mid < q = {q:.6g}, got {f}")
    x = (1.0 - q) * f / (q * (1.0 - f))
    space = OutcomeSpace.binary()
    pf, p1 = binary_pmf(space, f), binary_pmf(space, 1.0)
    recs = (
        Record("neg", "0", {"pred": f, "dist_pred": pf}, {}, 1.0 - q),
        Record("pos_mid", "1", {"pred": f, "dist_pred": pf}, {}, q * x),
        Record("pos_one", "1", {"pred": 1.0, "dist_pred": p1}, {}, q * (1.0 - x)),
    )
    ds = PredictionDataset(space, recs, f"cost_parity({c:g},{d:g},{f:g})")
    loss_c, _ = make_simple_loss(c, space)
    loss_d, _ = make_simple_loss(d, space)
    grid = ("b", "a")
    gap = (1.0 - q) * abs(f * (1.0 - c) / (1.0 - f) - d)
    expected = {
        "vanilla_at_f": Expectation(
            "vanilla_calibration@f_mid", 0.0, 1e-12, "construction",
            lambda s: vanilla_calibration(s.dataset, "pred").entry(f).residual,
        ),
        "vanilla_at_1": Expectation(
            "vanilla_calibration@1", 0.0, 1e-12, "construction",
            lambda s: vanilla_calibration(s.dataset, "pred").entry(1.0).residual,
        ),
        "bayes_risk_c": Expectation(
            "best_response[simple(c)]", (1.0 - c) * q, 1e-12, "closed form (1-c) q",
            lambda s: best_response(loss_c, s.dataset.marginal(), grid)[1],
        ),
        "bayes_risk_d": Expectation(
            "best_response[simple(d)]", d * (1.0 - q), 1e-12, "closed form d (1-q)",
            lambda s: best_response(loss_d, s.dataset.marginal(), grid)[1],
        ),
        "cost_gap": Expectation(
            "cost_gap[simple(c), simple(d)]", gap, 1e-12,
            "closed form (1-q) |f (1-c)/(1-f) - d|",
            lambda s: cost_gap(s.dataset, "dist_pred", (loss_c, grid), (loss_d, grid)),
        ),
    }
    return Scenario(
        ds, {"mean": make_standard_property("mean", space)},
        {"simple_c": loss_c, "simple_d": loss_d}, expected,
        {"pred": "pred", "dist_pred": "dist_pred", "q": q, "x": x, "c": c, "d": d, "f_mid": f},
        ds.name,
    )


def counterexample_suite() -> list[Scenario]:
    """The fixed counterexample instances checked by the verify driver."""
    out = [
        counterexample_half_predictor(0.8),
        counterexample_half_predictor(0.2),
        counterexample_mean_variance(1.25),
        counterexample_mean_variance(1.25, marginal=(0.3, 0.7)),
    ]
    out += [cost_parity_construction(0.6, 0.3, f) for f in (0.32, 0.35, 0.40)]
    return out

