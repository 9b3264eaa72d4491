import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calib_atlas.errors import EmptyGroup, EmptyMap, KindMismatch, MissingDistPrediction, NotBinary
from calib_atlas.losses import best_response, expected_loss, make_simple_loss, squared_loss, zero_one_loss
from calib_atlas.metrics import (
    LevelEntry,
    LevelResidualMap,
    aggregate,
    bayes_risk_estimation_residual,
    decision_calibration,
    distribution_calibration,
    gamma_calibration,
    group_metric,
    multigroup_metric,
    robust_swap_regret,
    swap_regret,
    vanilla_calibration,
)
from calib_atlas.outcomes import OutcomeSpace, dataset_from_rows, pmf_new
from calib_atlas.properties import make_standard_property, mean_grid
from calib_atlas.verify.harness import scenario_rng
from calib_atlas.verify.oracle import generic_scenario
from calib_atlas.verify.scenarios import build_dataset, counterexample_half_predictor

B = OutcomeSpace.binary()
TENTHS = tuple(k / 10 for k in range(11))


def bern(p1):
    return pmf_new(B, [1 - p1, p1])


def blocks_binary(spec):
    """[(x, weight, rate, preds, groups)] -> exact binary dataset."""
    return build_dataset(B, [(x, w, (1 - r, r), preds, g) for x, w, r, preds, g in spec])


# --- vanilla -----------------------------------------------------------------

def test_vanilla_perfect_degenerate():
    rows = [(i, "1", {"p": 1.0}, 1.0) for i in range(7)] + [(i + 7, "0", {"p": 0.0}, 1.0) for i in range(3)]
    assert vanilla_calibration(dataset_from_rows(B, rows), "p").residuals() == {0.0: 0.0, 1.0: 0.0}


def test_vanilla_constant_at_base_rate():
    ds = dataset_from_rows(B, [("a", "1", {"p": 0.25}, 1.0), ("b", "0", {"p": 0.25}, 3.0)])
    m = vanilla_calibration(ds, "p")
    assert len(m) == 1 and m.entry(0.25).residual == 0.0


def test_vanilla_three_of_four():
    ds = dataset_from_rows(B, [(i, y, {"p": 0.7}, 1.0) for i, y in enumerate("1011")])
    assert vanilla_calibration(ds, "p").entry(0.7).residual == pytest.approx(0.05, abs=1e-15)


def test_vanilla_bins():
    ds = dataset_from_rows(B, [("a", "1", {"p": 0.62}, 1.0), ("b", "0", {"p": 0.68}, 1.0)])
    m = vanilla_calibration(ds, "p", bin_width=0.1)
    (e,) = m.entries
    assert e.predicted == pytest.approx(0.65) and e.observed == 0.5
    assert e.residual == pytest.approx(0.15)


def test_vanilla_needs_binary(three):
    ds = dataset_from_rows(three, [("a", "1", {"p": 0.5}, 1.0)])
    with pytest.raises(NotBinary):
        vanilla_calibration(ds, "p")


def test_vanilla_needs_probabilities():
    ds = dataset_from_rows(B, [("a", "1", {"p": 1.5}, 1.0)])
    with pytest.raises(KindMismatch):
        vanilla_calibration(ds, "p")


def test_min_weight_skips_levels():
    ds = dataset_from_rows(B, [("a", "1", {"p": 0.5}, 99.0), ("b", "1", {"p": 0.1}, 1.0)])
    m = vanilla_calibration(ds, "p", min_weight=0.05)
    assert list(m.residuals()) == [0.5] and m.skipped == (0.1,)


# --- distribution calibration ----------------------------------------------------

def test_distribution_oracle_zero(three, rng):
    from calib_atlas.outcomes import random_pmf

    pool = [random_pmf(three, rng) for _ in range(4)]
    ds = build_dataset(three, [(f"x{i}", 0.25, p, {"f": p}, {}) for i, p in enumerate(pool)])
    for kind in ("mode", "mean", "full_distribution"):
        assert distribution_calibration(ds, "f", make_standard_property(kind, three)).max() <= 1e-15


def test_distribution_average_not_pointwise(three):
    # both forecasts have mode 0; their average equals the pooled outcomes
    f1, f2 = pmf_new(three, [0.6, 0.3, 0.1]), pmf_new(three, [0.5, 0.1, 0.4])
    c1, c2 = (0.7, 0.1, 0.2), (0.4, 0.3, 0.3)
    ds = build_dataset(three, [("x1", 0.5, c1, {"f": f1}, {}), ("x2", 0.5, c2, {"f": f2}, {})])
    m = distribution_calibration(ds, "f", make_standard_property("mode", three))
    assert m.max() == pytest.approx(0.0, abs=1e-15)


def test_distribution_hand_residual():
    ds = dataset_from_rows(B, [("a", "0", {"f": bern(0.4)}, 1.0), ("b", "0", {"f": bern(0.2)}, 1.0)])
    e = distribution_calibration(ds, "f", make_standard_property("mode", B)).entry("0")
    assert e.residual == pytest.approx(0.3, abs=1e-15)
    assert e.predicted == pytest.approx((0.7, 0.3))


def test_distribution_needs_dist_prediction():
    ds = dataset_from_rows(B, [("a", "0", {"f": 0.2}, 1.0)])
    with pytest.raises(MissingDistPrediction):
        distribution_calibration(ds, "f", make_standard_property("mode", B))


# --- gamma calibration ---------------------------------------------------------------

def test_gamma_mean_at_base_rates():
    ds = blocks_binary([("a", 0.5, 0.2, {"f": 0.2}, {}), ("b", 0.5, 0.9, {"f": 0.9}, {})])
    assert gamma_calibration(ds, "f", make_standard_property("mean", B)).max() == pytest.approx(0, abs=1e-15)


def test_gamma_pooled_in_level(three):
    # conditionals stray from the mode level individually, pooled mode is 0
    ds = build_dataset(three, [("x1", 0.5, (0.3, 0.6, 0.1), {"f": "0"}, {}),
                               ("x2", 0.5, (0.9, 0.0, 0.1), {"f": "0"}, {})])
    assert gamma_calibration(ds, "f", make_standard_property("mode", three)).entry("0").residual == 0.0


def test_gamma_discrete_miss(three):
    ds = build_dataset(three, [("x1", 1.0, (0.2, 0.7, 0.1), {"f": "0"}, {})])
    assert gamma_calibration(ds, "f", make_standard_property("mode", three)).entry("0").residual == 1.0


def test_gamma_kind_check():
    ds = dataset_from_rows(B, [("a", "0", {"f": "0"}, 1.0)])
    with pytest.raises(KindMismatch):
        gamma_calibration(ds, "f", make_standard_property("mean", B))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vanilla_is_gamma_mean_on_binary(seed):
    s = generic_scenario(scenario_rng(seed, 0, 0), binary=True)
    van = vanilla_calibration(s.dataset, "pred")
    gam = gamma_calibration(s.dataset, "pred", make_standard_property("mean", B))
    assert van.residuals().keys() == gam.residuals().keys()
    for e in van:
        assert abs(e.residual - gam.entry(e.level).residual) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_level_map_invariants(seed):
    s = generic_scenario(scenario_rng(seed, 1, 0))
    m = s.meta
    maps = [distribution_calibration(s.dataset, "dist_pred", m["gamma_dist"]),
            gamma_calibration(s.dataset, "value_pred", m["gamma"]),
            swap_regret(s.dataset, "act_pred", m["loss"], m["grid"])]
    for lm in maps:
        assert all(e.weight > 0 and e.residual >= 0 for e in lm)
        assert sum(e.weight for e in lm) <= 1 + 1e-9


# --- swap regret ---------------------------------------------------------------------

def test_swap_half_alpha_squared():
    half_sq = squared_loss(B, 0.5)
    ds = blocks_binary([("a", 0.5, 0.3, {"f": 0.4}, {}), ("b", 0.5, 0.8, {"f": 0.6}, {})])
    m = swap_regret(ds, "f", half_sq, sorted(set(TENTHS) | {0.3, 0.8}))
    assert m.entry(0.4).residual == pytest.approx(0.5 * 0.1**2, abs=1e-15)
    assert m.entry(0.6).residual == pytest.approx(0.5 * 0.2**2, abs=1e-15)


def test_swap_zero_when_calibrated():
    ds = blocks_binary([("a", 0.5, 0.3, {"f": 0.3}, {}), ("b", 0.5, 0.8, {"f": 0.8}, {})])
    assert swap_regret(ds, "f", squared_loss(B), TENTHS).max() == 0.0


def test_swap_constant_at_global_argmin(three):
    loss = zero_one_loss(three)
    ds = build_dataset(three, [("x", 1.0, (0.2, 0.5, 0.3), {"f": "1"}, {})])
    m = swap_regret(ds, "f", loss, three.labels)
    assert len(m) == 1 and m.max() == 0.0


def test_swap_clips_grid_coarseness():
    # the incurred value beats every grid point: clipped to 0, sign kept
    ds = blocks_binary([("a", 1.0, 0.33, {"f": 0.33}, {})])
    e = swap_regret(ds, "f", squared_loss(B), (0.0, 0.5, 1.0)).entry(0.33)
    assert e.residual == 0.0 and e.extra["signed"] < 0


# --- decision calibration -----------------------------------------------------------

def test_decision_oracle_zero(three):
    ps = [pmf_new(three, w) for w in ((0.2, 0.5, 0.3), (0.6, 0.1, 0.3))]
    ds = build_dataset(three, [(f"x{i}", 0.5, p, {"f": p}, {}) for i, p in enumerate(ps)])
    res = decision_calibration(ds, "f", [(zero_one_loss(three), three.labels),
                                          (squared_loss(three), mean_grid(three, 21))])
    assert all(r.value <= 1e-15 for r in res.values())


def test_decision_half_predictor():
    s = counterexample_half_predictor(0.8)
    beta = decision_calibration(s.dataset, "dist_pred", [(squared_loss(B), s.meta["grid"])])["squared"]
    assert beta.value <= 1e-12
    assert vanilla_calibration(s.dataset, "pred").entry(0.5).residual == pytest.approx(0.3, abs=1e-12)


def test_decision_simple_family_on_calibrated():
    ds = build_dataset(B, [(f"x{i}", 0.25, (1 - v, v), {"f": bern(v)}, {})
                           for i, v in enumerate((0.125, 0.25, 0.5, 0.875))])
    losses = {}
    for k in range(101):
        loss, _ = make_simple_loss(k / 100, B)
        losses[f"q{k}"] = (loss, loss.grid)
    assert max(r.value for r in decision_calibration(ds, "f", losses).values()) <= 1e-12


def test_decision_signed_direction():
    ds = blocks_binary([("a", 1.0, 0.8, {"f": bern(0.5)}, {})])
    r = decision_calibration(ds, "f", [(zero_one_loss(B), B.labels)])["zero_one"]
    # act "0" (first tie), realized error 0.8, self-estimate 0.5
    assert r.signed == pytest.approx(0.3) and r.value == pytest.approx(0.3)


def test_decision_duplicate_loss_names():
    ds = blocks_binary([("a", 1.0, 0.8, {"f": bern(0.5)}, {})])
    res = decision_calibration(ds, "f", [(squared_loss(B), TENTHS), (squared_loss(B), (0.0, 1.0))])
    assert set(res) == {"squared", "squared#1"}


# --- Bayes risk estimation residual ---------------------------------------------------

def _risk_dataset(offset):
    loss = squared_loss(B)
    rows = []
    for i, (rate, act) in enumerate(((0.2, 0.3), (0.7, 0.6), (0.5, 0.1))):
        risk = expected_loss(loss, bern(rate), act) + offset
        rows.append((f"x{i}", 1 / 3, (1 - rate, rate), {"g": act, "h": risk}, {}))
    return build_dataset(B, rows), loss


def test_bayes_residual_oracle_risk():
    ds, loss = _risk_dataset(0.0)
    assert bayes_risk_estimation_residual(ds, "g", "h", loss).value <= 1e-15


@pytest.mark.parametrize("c", [-0.2, 0.05, 0.3])
def test_bayes_residual_offset(c):
    ds, loss = _risk_dataset(c)
    r = bayes_risk_estimation_residual(ds, "g", "h", loss)
    assert r.value == pytest.approx(abs(c), abs=1e-15) and r.signed == pytest.approx(-c, abs=1e-15)


# --- aggregation ---------------------------------------------------------------------

def _map(*pairs):
    return LevelResidualMap(tuple(LevelEntry(i, w, r) for i, (r, w) in enumerate(pairs)), "m")


@pytest.mark.parametrize("mode", ["expected", "expected_square", "sup"])
def test_aggregate_zero(mode):
    assert aggregate(_map((0.0, 0.5), (0.0, 0.5)), mode) == 0.0


def test_aggregate_examples():
    m = _map((0.1, 0.5), (0.3, 0.5))
    assert aggregate(m, "expected") == pytest.approx(0.2, abs=1e-15)
    assert aggregate(m, "expected_square") == pytest.approx(0.05, abs=1e-15)
    assert aggregate(m, "sup") == 0.3


def test_aggregate_empty():
    with pytest.raises(EmptyMap):
        aggregate(LevelResidualMap((), "m"), "sup")


def test_aggregate_unknown_mode():
    with pytest.raises(ValueError):
        aggregate(_map((0.1, 1.0)), "median")


# --- groups -----------------------------------------------------------------------------

def _two_groups():
    return blocks_binary([("a", 0.5, 0.3, {"f": 0.5}, {"A": 1, "all": 1}),
                          ("b", 0.5, 0.7, {"f": 0.5}, {"A": 0, "all": 1})])


def test_group_all_ones_matches_ungrouped():
    ds = _two_groups()
    rep = group_metric(ds, "all", lambda d: vanilla_calibration(d, "f"))
    assert rep.complement is None
    assert rep.inside.residuals() == vanilla_calibration(ds, "f").residuals()


def test_multicalibration_stricter_than_pooled():
    ds = _two_groups()
    assert vanilla_calibration(ds, "f").max() == pytest.approx(0.0, abs=1e-15)
    rep = group_metric(ds, "A", lambda d: vanilla_calibration(d, "f"))
    assert rep.inside.max() == pytest.approx(0.2) and rep.complement.max() == pytest.approx(0.2)
    assert rep.sup == pytest.approx(0.2)


def test_multigroup():
    reports, sup = multigroup_metric(_two_groups(), ["A", "all"], lambda d: vanilla_calibration(d, "f"))
    assert set(reports) == {"A", "all"} and sup == pytest.approx(0.2)
    with pytest.raises(EmptyGroup):
        multigroup_metric(_two_groups(), [], lambda d: vanilla_calibration(d, "f"))


# --- robust swap regret ----------------------------------------------------------------

def _robust_scenario(alpha):
    """Three levels; within each, group g1 runs alpha above the forecast and
    g2 alpha below, so the pooled forecast is calibrated."""
    rows = []
    for i, v in enumerate((0.25, 0.5, 0.75)):
        rows.append((f"u{i}", 1 / 6, v + alpha, {"f": v}, {"g1": 1, "g2": 0, "all": 1}))
        rows.append((f"d{i}", 1 / 6, v - alpha, {"f": v}, {"g1": 0, "g2": 1, "all": 1}))
    grid = sorted({k / 20 for k in range(21)} | {v + s * alpha for v in (0.25, 0.5, 0.75) for s in (-1, 1)})
    return blocks_binary(rows), squared_loss(B, 0.5), grid


def test_robust_swap_half_alpha_squared():
    alpha = 0.1
    ds, loss, grid = _robust_scenario(alpha)
    assert swap_regret(ds, "f", loss, grid).max() == pytest.approx(0.0, abs=1e-15)
    r = robust_swap_regret(ds, "f", loss, ["g1", "g2"], grid)
    # N = M = 1: every group-level gap is exactly alpha^2 / 2
    assert r.conditional == pytest.approx(0.5 * alpha**2, abs=1e-12)
    assert r.value == pytest.approx(0.5 * 0.5 * alpha**2, abs=1e-12)
    assert r.per_group["g1"]["share"] == pytest.approx(0.5)


def test_robust_swap_zero_when_multicalibrated():
    ds, loss, grid = _robust_scenario(0.0)
    assert robust_swap_regret(ds, "f", loss, ["g1", "g2"], grid).value == pytest.approx(0.0, abs=1e-15)


def test_robust_swap_trivial_group_is_swap_sum():
    ds = blocks_binary([("a", 0.3, 0.2, {"f": 0.4}, {"all": 1}), ("b", 0.7, 0.9, {"f": 0.6}, {"all": 1})])
    loss = squared_loss(B)
    m = swap_regret(ds, "f", loss, TENTHS)
    r = robust_swap_regret(ds, "f", loss, ["all"], TENTHS)
    assert r.value == pytest.approx(sum(e.weight * e.residual for e in m), abs=1e-15)


def test_robust_swap_needs_groups():
    ds, loss, grid = _robust_scenario(0.1)
    with pytest.raises(EmptyGroup):
        robust_swap_regret(ds, "f", loss, [], grid)


def test_best_response_matches_swap_reference():
    ds, loss, grid = _robust_scenario(0.1)
    e = swap_regret(ds.restrict("g1"), "f", loss, grid).entry(0.5)
    assert e.extra["best_response"] == best_response(loss, bern(0.6), grid)[0]
