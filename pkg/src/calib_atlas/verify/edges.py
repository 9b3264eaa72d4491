"""Implication edges between calibration notions, with scenario generators.

Each edge has a generator that draws a random exact scenario satisfying the
edge's hypothesis and a checker that measures the hypothesis, evaluates the
guaranteed bound with the constants available from metadata (|Y|, K, N, M,
C, B) and compares it with the conclusion residual.

``slack`` is ``bound + NUM_TOL - residual`` at the tightest level, so it is
non-negative exactly when the conclusion holds.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import CalibError, MissingIngredient
from ..losses import (
    LossFn,
    loss_from_identification,
    make_bayes_pair,
    make_identification,
    make_simple_loss,
    pinball_loss,
    squared_loss,
    zero_one_loss,
)
from ..metrics import (
    aggregate,
    bayes_risk_estimation_residual,
    decision_calibration,
    distribution_calibration,
    gamma_calibration,
    swap_regret,
    vanilla_calibration,
)
from ..outcomes import OutcomeSpace, Pmf, PredictionDataset, lattice_pmf, pmf_new, random_pmf
from ..properties import (
    Property,
    level_set_convexity_check,
    make_standard_property,
    refine,
    value_distance,
)
from .scenarios import Scenario, build_dataset

NUM_TOL = 1e-9
EXACT_TOL = 1e-12
CONVEXITY_TRIALS = 200


@dataclass(frozen=True)
class EdgeResult:
    edge: str
    hypothesis_met: bool
    conclusion_holds: bool
    slack: float
    bound: float
    residual: float
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ImplicationEdge:
    name: str
    statement: str
    generate: Callable[[np.random.Generator], Scenario]
    check: Callable[[Scenario, float], EdgeResult]


# ---------------------------------------------------------------------------
# shared construction helpers


def space_of_size(k: int) -> OutcomeSpace:
    return OutcomeSpace(tuple(str(i) for i in range(k)), tuple(float(i) for i in range(k)))


def _dyadic_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(1, 9, size=n) / 8.0


def spread_conditionals(
    rng: np.random.Generator,
    centers: list[np.ndarray],
    weights: np.ndarray,
    exact: bool,
    s_max: float = 0.3,
) -> list[np.ndarray]:
    """Outcome conditionals for a group of inputs sharing one level.

    ``exact``: each input gets its center plus a share of a zero-mean
    (under ``weights``) perturbation, so the weighted average of the
    conditionals equals the weighted average of the centers. Otherwise each
    conditional is pulled toward a random Pmf by a random fraction.
    """
    k = len(centers[0])
    r = [random_pmf_array(rng, k) for _ in centers]
    if not exact:
        s = rng.uniform(0.0, s_max, size=len(centers))
        return [(1.0 - si) * c + si * ri for c, ri, si in zip(centers, r, s)]
    if len(centers) == 1:
        return [centers[0].copy()]
    rbar = np.average(np.vstack(r), axis=0, weights=weights)
    dirs = [ri - rbar for ri in r]
    t_max = np.inf
    for c, d in zip(centers, dirs):
        neg = d < 0
        if np.any(neg):
            t_max = min(t_max, float(np.min(c[neg] / -d[neg])))
    t = float(rng.uniform(0.0, 0.9)) * (t_max if np.isfinite(t_max) else 1.0)
    return [c + t * d for c, d in zip(centers, dirs)]


def random_pmf_array(rng: np.random.Generator, k: int) -> np.ndarray:
    e = rng.exponential(size=k)
    return e / e.sum()


def _as_pmf(space: OutcomeSpace, a: np.ndarray) -> Pmf:
    return pmf_new(space, np.clip(a, 0.0, None))


def dist_prediction_dataset(
    rng: np.random.Generator,
    space: OutcomeSpace,
    sampler: Callable[[np.random.Generator], Pmf],
    level_of: Callable[[Pmf], Any],
    exact: bool,
    s_max: float = 0.3,
) -> PredictionDataset:
    """Inputs forecast from a small pool of Pmfs; outcome conditionals are
    spread around the forecasts level by level (exactly mean-preserving when
    ``exact``)."""
    pool = [sampler(rng) for _ in range(int(rng.integers(2, 6)))]
    n_x = int(rng.integers(3, 11))
    picks = rng.integers(0, len(pool), size=n_x)
    w = _dyadic_weights(rng, n_x)
    by_level: dict[Any, list[int]] = {}
    for i, j in enumerate(picks):
        by_level.setdefault(level_of(pool[j]), []).append(i)
    cond: dict[int, np.ndarray] = {}
    for members in by_level.values():
        centers = [pool[picks[i]].array for i in members]
        outs = spread_conditionals(rng, centers, w[members], exact, s_max)
        cond.update(zip(members, outs))
    blocks = [
        (f"x{i}", float(w[i]), _as_pmf(space, cond[i]), {"dist_pred": pool[picks[i]]}, {})
        for i in range(n_x)
    ]
    return build_dataset(space, blocks)


_CONVEX_CACHE: dict[tuple, bool] = {}


def convex_level_sets(prop: Property) -> bool:
    """Cached randomized convexity check (no counterexample found)."""
    key = (prop.name, prop.space, repr(sorted(prop.params.items())) if prop.params else "")
    if key not in _CONVEX_CACHE:
        try:
            res = level_set_convexity_check(prop, CONVEXITY_TRIALS, seed=0)
            _CONVEX_CACHE[key] = res.convex
        except CalibError:
            _CONVEX_CACHE[key] = False
    return _CONVEX_CACHE[key]


def _result(edge, hyp, per_level, details=None) -> EdgeResult:
    """Fold per-level (bound, residual) pairs into one EdgeResult."""
    details = dict(details or {})
    if not per_level:
        return EdgeResult(edge, hyp, True, NUM_TOL, 0.0, 0.0, details)
    slacks = [b + NUM_TOL - r for b, r in per_level]
    i = int(np.argmin(slacks))
    b, r = per_level[i]
    details["levels"] = len(per_level)
    return EdgeResult(edge, hyp, slacks[i] >= 0.0, float(slacks[i]), float(b), float(r), details)


def _get(s: Scenario, key: str):
    if key in s.meta:
        return s.meta[key]
    if key in s.properties:
        return s.properties[key]
    if key in s.losses:
        return s.losses[key]
    raise MissingIngredient(f"{s.name}: missing {key}")


# ---------------------------------------------------------------------------
# property / loss families used by the generators


def _dist_family(rng: np.random.Generator, which: str | None = None):
    """(space, property, sampler) for distribution-level edges."""
    fam = which or str(rng.choice(["mode", "ranking", "mean", "quantile", "simple_binary"]))
    if fam == "mode":
        sp = space_of_size(int(rng.integers(2, 5)))
        return sp, make_standard_property("mode", sp), lambda r: random_pmf(sp, r)
    if fam == "ranking":
        sp = space_of_size(3)
        return sp, make_standard_property("ranking", sp), lambda r: random_pmf(sp, r)
    if fam == "mean":
        sp = space_of_size(int(rng.integers(2, 5)))
        return sp, make_standard_property("mean", sp), lambda r: lattice_pmf(sp, r, 8)
    if fam == "quantile":
        # tau = 0.3 stays clear of every CDF value on the 1/8 lattice
        sp = space_of_size(int(rng.integers(3, 5)))
        return sp, make_standard_property("quantile", sp, tau=0.3), lambda r: lattice_pmf(sp, r, 8)
    if fam == "simple_binary":
        sp = space_of_size(2)
        q = float(np.round(rng.uniform(0.2, 0.8), 3))
        return sp, make_standard_property("simple_binary", sp, q=q), lambda r: random_pmf(sp, r)
    if fam == "ratio":
        sp = space_of_size(int(rng.integers(2, 5)))
        y = np.arange(len(sp), dtype=float)
        prop = make_standard_property("ratio_of_expectations", sp, g=y, h=1.0 + 0.5 * y)
        return sp, prop, lambda r: lattice_pmf(sp, r, 8)
    raise ValueError(fam)


def _loss_family(rng: np.random.Generator) -> tuple[OutcomeSpace, LossFn, tuple]:
    """(space, loss, grid) for decision-level edges."""
    fam = str(rng.choice(["zero_one", "simple", "squared", "pinball"]))
    if fam == "simple":
        sp = space_of_size(2)
        loss, _ = make_simple_loss(float(np.round(rng.uniform(0.1, 0.9), 3)), sp)
        return sp, loss, loss.grid
    sp = space_of_size(int(rng.integers(2, 5)))
    if fam == "zero_one":
        loss = zero_one_loss(sp)
        return sp, loss, loss.grid
    if fam == "squared":
        grid = tuple(float(v) for v in np.linspace(0.0, len(sp) - 1.0, 21))
        return sp, squared_loss(sp, float(rng.choice([0.5, 1.0]))), grid
    loss = pinball_loss(sp, 0.3)
    return sp, loss, loss.grid


# ---------------------------------------------------------------------------
# 1. distribution calibration w.r.t. Gamma => Gamma-calibration


def gen_dist_implies_gamma(rng: np.random.Generator) -> Scenario:
    sp, prop, sampler = _dist_family(rng)
    ds = dist_prediction_dataset(rng, sp, sampler, prop.evaluator, exact=True)
    ds = ds.with_prediction("gamma_pred", lambda r: prop(r.preds["dist_pred"]))
    return Scenario(ds, {"gamma": prop}, {}, {}, {"dist_pred": "dist_pred", "gamma_pred": "gamma_pred"},
                    f"dist_implies_gamma[{prop.name}]")


def check_dist_implies_gamma(s: Scenario, scale: float = 1.0) -> EdgeResult:
    prop = _get(s, "gamma")
    dpred, gpred = _get(s, "dist_pred"), _get(s, "gamma_pred")
    dc = distribution_calibration(s.dataset, dpred, prop)
    convex = convex_level_sets(prop)
    hyp = dc.max() <= NUM_TOL and convex
    gc = gamma_calibration(s.dataset, gpred, prop)
    return _result("dist_implies_gamma", hyp, [(0.0 * scale, e.residual) for e in gc],
                   {"dist_residual": dc.max(), "convex": convex})


# ---------------------------------------------------------------------------
# 2. approximate version for Lipschitz Gamma: |Y| K alpha(gamma)


def gen_dist_implies_gamma_approx(rng: np.random.Generator) -> Scenario:
    sp, prop, sampler = _dist_family(rng, str(rng.choice(["mean", "ratio"])))
    ds = dist_prediction_dataset(rng, sp, sampler, prop.evaluator, exact=False)
    ds = ds.with_prediction("gamma_pred", lambda r: prop(r.preds["dist_pred"]))
    return Scenario(ds, {"gamma": prop}, {}, {}, {"dist_pred": "dist_pred", "gamma_pred": "gamma_pred"},
                    f"dist_implies_gamma_approx[{prop.name}]")


def check_dist_implies_gamma_approx(s: Scenario, scale: float = 1.0) -> EdgeResult:
    prop = _get(s, "gamma")
    dpred, gpred = _get(s, "dist_pred"), _get(s, "gamma_pred")
    k = prop.lipschitz
    hyp = prop.kind == "real" and k is not None and convex_level_sets(prop)
    dc = distribution_calibration(s.dataset, dpred, prop)
    gc = gamma_calibration(s.dataset, gpred, prop)
    n_y = len(s.dataset.space)
    pairs = [(n_y * (k or 0.0) * scale * dc.entry(e.level).residual, e.residual) for e in gc]
    return _result("dist_implies_gamma_approx", hyp, pairs, {"K": k, "n_outcomes": n_y})


# ---------------------------------------------------------------------------
# 3/4. distribution calibration w.r.t. Phi_l => decision calibration for l


def gen_dist_implies_decision(rng: np.random.Generator, exact: bool = True) -> Scenario:
    sp, loss, grid = _loss_family(rng)
    pair = make_bayes_pair(loss, grid)
    ds = dist_prediction_dataset(rng, sp, lambda r: random_pmf(sp, r), pair.phi.evaluator, exact=exact)
    tag = "dist_implies_decision" + ("" if exact else "_approx")
    return Scenario(ds, {"phi": pair.phi}, {"loss": loss}, {},
                    {"dist_pred": "dist_pred", "grid": grid}, f"{tag}[{loss.name}]")


def check_dist_implies_decision(s: Scenario, scale: float = 1.0) -> EdgeResult:
    phi, loss, grid, dpred = _get(s, "phi"), _get(s, "loss"), _get(s, "grid"), _get(s, "dist_pred")
    dc = distribution_calibration(s.dataset, dpred, phi)
    beta = decision_calibration(s.dataset, dpred, [(loss, grid)])[loss.name].value
    return _result("dist_implies_decision", dc.max() <= NUM_TOL, [(0.0 * scale, beta)],
                   {"dist_residual": dc.max()})


def check_dist_implies_decision_approx(s: Scenario, scale: float = 1.0) -> EdgeResult:
    phi, loss, grid, dpred = _get(s, "phi"), _get(s, "loss"), _get(s, "grid"), _get(s, "dist_pred")
    dc = distribution_calibration(s.dataset, dpred, phi)
    mean_alpha = aggregate(dc, "expected")
    beta = decision_calibration(s.dataset, dpred, [(loss, grid)])[loss.name].value
    c = loss.bound_C
    return _result("dist_implies_decision_approx", c is not None,
                   [((c or 0.0) * scale * mean_alpha, beta)], {"C": c, "mean_alpha": mean_alpha})


# ---------------------------------------------------------------------------
# 5. Gamma-calibration <=> swap regret: N/2 a^2 <= beta <= M/2 a^2


def planted_offset_scenario(
    rng: np.random.Generator,
    family: str = "mean",
    alphas: tuple = (0.01, 0.05, 0.1, 0.2),
) -> Scenario:
    """Levels whose pooled outcome property misses the forecast by a planted
    offset drawn from ``alphas``.

    The swap-regret grid contains every pooled property value, so the grid
    minimum is the exact conditional minimum.
    """
    k = int(rng.integers(2, 5))
    sp = space_of_size(k)
    y = np.arange(k, dtype=float)
    if family == "mean":
        prop = make_standard_property("mean", sp)
        ident = make_identification("mean", sp)
        loss = loss_from_identification(ident, 0.0, {lab: 0.5 * v * v for lab, v in zip(sp.labels, y)})
    else:
        g, h = y, 1.0 + 0.5 * y
        prop = make_standard_property("ratio_of_expectations", sp, g=g, h=h)
        ident = make_identification("ratio_of_expectations", sp, g=g, h=h)
        loss = loss_from_identification(ident, 0.0)
    n_levels = int(rng.integers(2, 6))
    blocks, planted = [], {}
    for lv in range(n_levels):
        target = random_pmf_array(rng, k)
        n_x = int(rng.integers(1, 4))
        w = _dyadic_weights(rng, n_x)
        outs = spread_conditionals(rng, [target] * n_x, w, exact=True)
        for j in range(n_x):
            blocks.append((f"L{lv}x{j}", float(w[j]), _as_pmf(sp, outs[j]), {"level": lv}, {}))
        planted[lv] = float(rng.choice(alphas)) * (1.0 if rng.uniform() < 0.5 else -1.0)
    ds = build_dataset(sp, blocks)
    realized = {lv: prop(ds.outcome_pmf(idx)) for lv, idx in ds.levels("level").items()}
    ds = ds.with_prediction("pred", lambda r: realized[r.preds["level"]] + planted[r.preds["level"]])
    grid = set(np.linspace(0.0, k - 1.0, 51).tolist())
    grid.update(realized.values())
    grid.update(realized[lv] + planted[lv] for lv in realized)
    grid = tuple(sorted(grid))
    return Scenario(
        ds, {"gamma": prop}, {"loss": loss}, {},
        {"pred": "pred", "grid": grid, "identification": ident,
         "planted": {realized[lv] + planted[lv]: abs(planted[lv]) for lv in realized}},
        f"gamma_iff_swap[{prop.name}]",
    )


def gen_gamma_iff_swap(rng: np.random.Generator) -> Scenario:
    fam = "mean" if rng.uniform() < 0.5 else "ratio"
    return planted_offset_scenario(rng, fam, (0.0, 0.01, 0.05, 0.1, 0.2))


def check_gamma_iff_swap(s: Scenario, scale: float = 1.0) -> EdgeResult:
    prop, loss, grid = _get(s, "gamma"), _get(s, "loss"), _get(s, "grid")
    ident, pred = _get(s, "identification"), _get(s, "pred")
    n, m = ident.nonconstant_N, ident.lipschitz_M
    hyp = ident.oriented and n is not None and m is not None
    alpha = gamma_calibration(s.dataset, pred, prop)
    beta = swap_regret(s.dataset, pred, loss, grid)
    pairs = []
    for e in beta:
        a2 = alpha.entry(e.level).residual ** 2
        upper = 0.5 * (m or 0.0) * scale * a2
        lower = 0.5 * (n or 0.0) * scale * a2
        # two-sided: report the tighter side as a one-sided (bound, residual)
        if upper - e.residual <= e.residual - lower:
            pairs.append((upper, e.residual))
        else:
            pairs.append((-lower, -e.residual))
    return _result("gamma_iff_swap", hyp, pairs, {"N": n, "M": m})


# ---------------------------------------------------------------------------
# 6. Gamma-calibration inherited by refinements (exact, or K alpha' for
#    Lipschitz phi)


def gen_gamma_inherited(rng: np.random.Generator) -> Scenario:
    k = int(rng.integers(2, 5))
    sp = space_of_size(k)
    prop = make_standard_property("mean", sp)
    approx = rng.uniform() < 0.5
    n_levels = int(rng.integers(3, 7))
    blocks = []
    for lv in range(n_levels):
        target = random_pmf_array(rng, k)
        n_x = int(rng.integers(1, 4))
        w = _dyadic_weights(rng, n_x)
        for j, out in enumerate(spread_conditionals(rng, [target] * n_x, w, exact=True)):
            blocks.append((f"L{lv}x{j}", float(w[j]), _as_pmf(sp, out), {"level": lv}, {}))
    ds = build_dataset(sp, blocks)
    realized = {lv: prop(ds.outcome_pmf(idx)) for lv, idx in ds.levels("level").items()}
    offsets = {lv: (float(rng.uniform(-0.1, 0.1)) if approx else 0.0) for lv in realized}
    ds = ds.with_prediction("pred", lambda r: realized[r.preds["level"]] + offsets[r.preds["level"]])
    lo, hi = 0.0, k - 1.0
    # cuts on a 1/8 lattice of the range keep the convexity cache small
    cut = lo + (hi - lo) * int(rng.integers(2, 7)) / 8.0
    if approx:
        kk = float(rng.choice([0.5, 1.0, 2.0]))
        shift = float(rng.choice([0.0, 1.0]))
        phi_map = lambda t, kk=kk, c=cut, b=shift: kk * min(t, c) + b  # noqa: E731
        phi = refine(prop, phi_map, "abs_diff", f"scaled_min({kk:g},{cut:g},{shift:g})", lipschitz=kk)
    elif rng.uniform() < 0.5:
        phi_map = lambda t, c=cut: "hi" if t > c else "lo"  # noqa: E731
        phi = refine(prop, phi_map, "discrete", f"threshold({cut:g})")
    else:
        phi_map = lambda t: float(np.floor(t * 4.0)) / 4.0  # noqa: E731
        phi = refine(prop, phi_map, "abs_diff", "quarter_bins")
    ds = ds.with_prediction("phi_pred", lambda r: phi_map(r.preds["pred"]))
    return Scenario(
        ds, {"gamma": prop, "phi": phi}, {}, {},
        {"pred": "pred", "phi_pred": "phi_pred", "phi_map": phi_map, "phi_lipschitz": phi.lipschitz},
        f"gamma_inherited[{phi.name}]",
    )


def check_gamma_inherited(s: Scenario, scale: float = 1.0) -> EdgeResult:
    prop, phi, phi_map = _get(s, "gamma"), _get(s, "phi"), _get(s, "phi_map")
    pred, phi_pred = _get(s, "pred"), _get(s, "phi_pred")
    k = s.meta.get("phi_lipschitz")
    alpha = gamma_calibration(s.dataset, pred, prop)
    exact = alpha.max() <= NUM_TOL
    convex = convex_level_sets(phi)
    hyp = convex and (exact or k is not None)
    worst: dict[Any, float] = {}
    for e in alpha:
        v = phi_map(e.level)
        worst[v] = max(worst.get(v, 0.0), e.residual)
    res = gamma_calibration(s.dataset, phi_pred, phi)
    pairs = []
    for e in res:
        bound = 0.0 if k is None else k * worst[e.level]
        pairs.append((bound * scale, e.residual))
    return _result("gamma_inherited", hyp, pairs, {"K": k, "exact": exact, "convex": convex})


# ---------------------------------------------------------------------------
# 7. distribution calibration inherited: alpha'(c) = sup alpha(gamma)


def gen_dist_inherited(rng: np.random.Generator) -> Scenario:
    fam = str(rng.choice(["ranking", "full", "mode", "mean"]))
    if fam == "ranking":
        sp = space_of_size(int(rng.integers(3, 5)))
        prop = make_standard_property("ranking", sp)
        phi_map, phi = (lambda r: r[0]), None
        phi = refine(prop, phi_map, "discrete", "top_label")
        sampler = lambda r: random_pmf(sp, r)  # noqa: E731
    elif fam == "full":
        sp = space_of_size(int(rng.integers(2, 5)))
        prop = make_standard_property("full_distribution", sp)
        labels = sp.labels
        phi_map = lambda p: labels[int(np.argmax(p.array))]  # noqa: E731
        phi = refine(prop, phi_map, "discrete", "argmax")
        sampler = lambda r: random_pmf(sp, r)  # noqa: E731
    elif fam == "mode":
        sp = space_of_size(int(rng.integers(3, 5)))
        prop = make_standard_property("mode", sp)
        phi_map = lambda t: "even" if int(t) % 2 == 0 else "odd"  # noqa: E731
        phi = refine(prop, phi_map, "discrete", "parity")
        sampler = lambda r: random_pmf(sp, r)  # noqa: E731
    else:
        sp = space_of_size(int(rng.integers(2, 5)))
        prop = make_standard_property("mean", sp)
        cut = 0.5 * (len(sp) - 1)
        phi_map = lambda t, c=cut: "hi" if t > c else "lo"  # noqa: E731
        phi = refine(prop, phi_map, "discrete", "above_mid")
        sampler = lambda r: lattice_pmf(sp, r, 8)  # noqa: E731
    exact = rng.uniform() < 0.25
    ds = dist_prediction_dataset(rng, sp, sampler, prop.evaluator, exact=exact)
    return Scenario(ds, {"gamma": prop, "phi": phi}, {}, {},
                    {"dist_pred": "dist_pred", "phi_map": phi_map}, f"dist_inherited[{phi.name}]")


def check_dist_inherited(s: Scenario, scale: float = 1.0) -> EdgeResult:
    prop, phi, phi_map, dpred = _get(s, "gamma"), _get(s, "phi"), _get(s, "phi_map"), _get(s, "dist_pred")
    alpha = distribution_calibration(s.dataset, dpred, prop)
    sup: dict[Any, float] = {}
    for e in alpha:
        c = phi_map(e.level)
        sup[c] = max(sup.get(c, 0.0), e.residual)
    res = distribution_calibration(s.dataset, dpred, phi)
    return _result("dist_inherited", True, [(sup[e.level] * scale, e.residual) for e in res])


# ---------------------------------------------------------------------------
# 8. low swap regret for refined properties: 2 B E[alpha | phi o f = v]


def outcome_lipschitz_constant(loss: LossFn, grid) -> float:
    """B with |l(P, v) - l(P', v)| <= B TV(P, P') for every act v in grid:
    the largest per-act spread max_y l(y, v) - min_y l(y, v)."""
    return max(float(np.ptp(loss.vector(v))) for v in grid)


def gen_swap_for_refined(rng: np.random.Generator) -> Scenario:
    sp, loss, grid = _loss_family(rng)
    pair = make_bayes_pair(loss, grid)
    full = make_standard_property("full_distribution", sp)
    ds = dist_prediction_dataset(rng, sp, lambda r: random_pmf(sp, r), lambda p: p,
                                 exact=rng.uniform() < 0.25)
    ds = ds.with_prediction("act_pred", lambda r: pair.phi(r.preds["dist_pred"]))
    return Scenario(
        ds, {"gamma": full, "phi": pair.phi}, {"loss": loss}, {},
        {"dist_pred": "dist_pred", "act_pred": "act_pred", "grid": grid,
         "B": outcome_lipschitz_constant(loss, grid)},
        f"swap_for_refined[{loss.name}]",
    )


def check_swap_for_refined(s: Scenario, scale: float = 1.0) -> EdgeResult:
    full, phi, loss, grid = _get(s, "gamma"), _get(s, "phi"), _get(s, "loss"), _get(s, "grid")
    dpred, apred, b = _get(s, "dist_pred"), _get(s, "act_pred"), _get(s, "B")
    alpha = gamma_calibration(s.dataset, dpred, full)
    num: dict[Any, float] = {}
    den: dict[Any, float] = {}
    for e in alpha:
        v = phi(e.level)
        num[v] = num.get(v, 0.0) + e.weight * e.residual
        den[v] = den.get(v, 0.0) + e.weight
    regret = swap_regret(s.dataset, apred, loss, grid)
    pairs = [(2.0 * b * scale * num[e.level] / den[e.level], e.residual) for e in regret]
    return _result("swap_for_refined", True, pairs, {"B": b})


# ---------------------------------------------------------------------------
# 9. decision calibration => precise Bayes risk estimation (beta carries over)


def gen_decision_implies_bayes(rng: np.random.Generator) -> Scenario:
    sp, loss, grid = _loss_family(rng)
    pair = make_bayes_pair(loss, grid)
    ds = dist_prediction_dataset(rng, sp, lambda r: random_pmf(sp, r), lambda p: p,
                                 exact=rng.uniform() < 0.25)
    ds = ds.with_prediction("decision_pred", lambda r: pair.phi(r.preds["dist_pred"]))
    ds = ds.with_prediction("risk_pred", lambda r: pair.theta(r.preds["dist_pred"]))
    return Scenario(ds, {"phi": pair.phi, "theta": pair.theta}, {"loss": loss}, {},
                    {"dist_pred": "dist_pred", "decision_pred": "decision_pred",
                     "risk_pred": "risk_pred", "grid": grid},
                    f"decision_implies_bayes[{loss.name}]")


def check_decision_implies_bayes(s: Scenario, scale: float = 1.0) -> EdgeResult:
    loss, grid, dpred = _get(s, "loss"), _get(s, "grid"), _get(s, "dist_pred")
    gpred, hpred = _get(s, "decision_pred"), _get(s, "risk_pred")
    beta = decision_calibration(s.dataset, dpred, [(loss, grid)])[loss.name].value
    res = bayes_risk_estimation_residual(s.dataset, gpred, hpred, loss).value
    return _result("decision_implies_bayes", True, [(beta * scale, res)], {"beta": beta})


# ---------------------------------------------------------------------------
# 10. (Phi, Theta)-self-realization => precise loss estimation


def gen_selfreal_implies_precise(rng: np.random.Generator) -> Scenario:
    sp, loss, grid = _loss_family(rng)
    pair = make_bayes_pair(loss, grid)
    n_levels = int(rng.integers(2, 6))
    blocks = []
    for lv in range(n_levels):
        target = random_pmf_array(rng, len(sp))
        n_x = int(rng.integers(1, 4))
        w = _dyadic_weights(rng, n_x)
        for j, out in enumerate(spread_conditionals(rng, [target] * n_x, w, exact=True)):
            blocks.append((f"L{lv}x{j}", float(w[j]), _as_pmf(sp, out), {"level": lv}, {}))
    ds = build_dataset(sp, blocks)
    acts, risks = {}, {}
    for lv, idx in ds.levels("level").items():
        pooled = ds.outcome_pmf(idx)
        acts[lv] = pair.phi(pooled)
        noise = 0.0 if rng.uniform() < 0.25 else float(rng.uniform(-0.1, 0.1))
        risks[lv] = pair.theta(pooled) + noise
    ds = ds.with_prediction("decision_pred", lambda r: acts[r.preds["level"]])
    ds = ds.with_prediction("risk_pred", lambda r: risks[r.preds["level"]])
    ds = ds.with_prediction("pair_pred", lambda r: (acts[r.preds["level"]], risks[r.preds["level"]]))
    return Scenario(ds, {"phi": pair.phi, "theta": pair.theta}, {"loss": loss}, {},
                    {"decision_pred": "decision_pred", "risk_pred": "risk_pred",
                     "pair_pred": "pair_pred", "grid": grid},
                    f"selfreal_implies_precise[{loss.name}]")


def check_selfreal_implies_precise(s: Scenario, scale: float = 1.0) -> EdgeResult:
    phi, theta, loss = _get(s, "phi"), _get(s, "theta"), _get(s, "loss")
    gpred, hpred, ppred = _get(s, "decision_pred"), _get(s, "risk_pred"), _get(s, "pair_pred")
    ds = s.dataset
    phi_ok = True
    weighted_alpha = 0.0
    for (act, risk), idx in ds.levels(ppred).items():
        pooled = ds.outcome_pmf(idx)
        if value_distance(phi.metric, phi(pooled), act) > NUM_TOL:
            phi_ok = False
        share = float(ds.weights[idx].sum() / ds.total_weight)
        weighted_alpha += share * abs(theta(pooled) - risk)
    res = bayes_risk_estimation_residual(ds, gpred, hpred, loss).value
    return _result("selfreal_implies_precise", phi_ok, [(weighted_alpha * scale, res)],
                   {"mean_alpha": weighted_alpha})


# ---------------------------------------------------------------------------
# 11. binary: vanilla calibration <=> decision calibration for all simple losses


def threshold_grid(values) -> tuple[float, ...]:
    """Predicted values, {0, 1}, and midpoints between consecutive points."""
    pts = sorted(set(float(v) for v in values) | {0.0, 1.0})
    mids = [0.5 * (a + b) for a, b in zip(pts, pts[1:])]
    return tuple(sorted(set(pts) | set(mids)))


def gen_decision_equiv_vanilla_binary(rng: np.random.Generator, calibrated: bool | None = None) -> Scenario:
    sp = OutcomeSpace.binary()
    if calibrated is None:
        calibrated = bool(rng.uniform() < 0.5)
    n_levels = int(rng.integers(1, 7))
    levels = sorted(set(int(v) for v in rng.integers(0, 65, size=n_levels)))
    values = [v / 64.0 for v in levels]
    rates = list(values)
    if not calibrated:
        i = int(rng.integers(0, len(values)))
        off = float(rng.uniform(0.02, 0.2)) * (1.0 if rng.uniform() < 0.5 else -1.0)
        if not 0.0 <= values[i] + off <= 1.0:
            off = -off
        rates[i] = values[i] + off
    w = _dyadic_weights(rng, len(values))
    blocks = [
        (f"x{j}", float(w[j]), (1.0 - rates[j], rates[j]),
         {"pred": values[j], "dist_pred": pmf_new(sp, [1.0 - values[j], values[j]])}, {})
        for j in range(len(values))
    ]
    ds = build_dataset(sp, blocks)
    qs = threshold_grid(values)
    return Scenario(ds, {}, {}, {}, {"pred": "pred", "dist_pred": "dist_pred", "q_grid": qs,
                                     "planted_calibrated": calibrated},
                    "decision_equiv_vanilla_binary")


def check_decision_equiv_vanilla_binary(s: Scenario, scale: float = 1.0) -> EdgeResult:
    pred, dpred, qs = _get(s, "pred"), _get(s, "dist_pred"), _get(s, "q_grid")
    ds = s.dataset
    van = vanilla_calibration(ds, pred).max()
    losses = {}
    for q in qs:
        loss, _ = make_simple_loss(q, ds.space)
        losses[f"q={q!r}"] = (loss, loss.grid)
    betas = decision_calibration(ds, dpred, losses)
    worst = max(b.value for b in betas.values())
    tol = EXACT_TOL * scale
    van_ok = van <= EXACT_TOL
    dec_ok = worst <= tol
    slack = (tol - worst) if van_ok else (worst - tol)
    return EdgeResult("decision_equiv_vanilla_binary", True, van_ok == dec_ok, float(slack),
                      float(tol), float(worst),
                      {"vanilla_max": van, "decision_max": worst, "n_losses": len(losses)})


EDGES: dict[str, ImplicationEdge] = {
    e.name: e
    for e in [
        ImplicationEdge("dist_implies_gamma",
                        "distribution calibration w.r.t. a convex-level-set property gives exact property calibration",
                        gen_dist_implies_gamma, check_dist_implies_gamma),
        ImplicationEdge("dist_implies_gamma_approx",
                        "alpha-distribution calibration gives |Y| K alpha property calibration for K-Lipschitz properties",
                        gen_dist_implies_gamma_approx, check_dist_implies_gamma_approx),
        ImplicationEdge("dist_implies_decision",
                        "distribution calibration w.r.t. the Bayes act gives decision calibration",
                        gen_dist_implies_decision, check_dist_implies_decision),
        ImplicationEdge("dist_implies_decision_approx",
                        "alpha-distribution calibration gives C E[alpha] decision calibration",
                        lambda rng: gen_dist_implies_decision(rng, exact=False),
                        check_dist_implies_decision_approx),
        ImplicationEdge("gamma_iff_swap",
                        "N/2 alpha^2 <= swap regret <= M/2 alpha^2 per level for induced losses",
                        gen_gamma_iff_swap, check_gamma_iff_swap),
        ImplicationEdge("gamma_inherited",
                        "property calibration passes to refinements (K alpha' for Lipschitz maps)",
                        gen_gamma_inherited, check_gamma_inherited),
        ImplicationEdge("dist_inherited",
                        "distribution calibration passes to refinements with the sup of alpha",
                        gen_dist_inherited, check_dist_inherited),
        ImplicationEdge("swap_for_refined",
                        "refined acts have swap regret at most 2 B E[alpha | act]",
                        gen_swap_for_refined, check_swap_for_refined),
        ImplicationEdge("decision_implies_bayes",
                        "beta-decision calibration gives a beta-precise Bayes risk estimator",
                        gen_decision_implies_bayes, check_decision_implies_bayes),
        ImplicationEdge("selfreal_implies_precise",
                        "(act, risk) self-realization bounds the Bayes risk residual by E|alpha|",
                        gen_selfreal_implies_precise, check_selfreal_implies_precise),
        ImplicationEdge("decision_equiv_vanilla_binary",
                        "binary vanilla calibration iff decision calibration for all simple losses",
                        gen_decision_equiv_vanilla_binary, check_decision_equiv_vanilla_binary),
    ]
}


def check_edge(edge: str | ImplicationEdge, scenario: Scenario, bound_scale: float = 1.0) -> EdgeResult:
    """Evaluate one edge on one scenario. ``bound_scale`` multiplies the
    bound's constants; anything but 1.0 is fault injection."""
    e = EDGES[edge] if isinstance(edge, str) else edge
    return e.check(scenario, bound_scale)
