import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calib_atlas.errors import (
    EmptyDataset,
    EmptyEvent,
    KindMismatch,
    LengthMismatch,
    NegativeWeight,
    NotNormalized,
    SpaceMismatch,
)
from calib_atlas.outcomes import (
    ConditionSpec,
    OutcomeSpace,
    Pmf,
    PredictionDataset,
    Record,
    condition,
    dataset_from_rows,
    lattice_pmf,
    mixture,
    pmf_new,
    point_mass,
    random_pmf,
    total_variation,
)


def simplex(k):
    return st.lists(st.floats(0.01, 10.0), min_size=k, max_size=k).map(
        lambda xs: [x / math.fsum(xs) for x in xs])


# --- OutcomeSpace / Pmf construction -----------------------------------------

def test_space_rejects_single_label():
    with pytest.raises(LengthMismatch):
        OutcomeSpace(("a",))


def test_space_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        OutcomeSpace(("a", "a"))


def test_space_embedding_length():
    with pytest.raises(LengthMismatch):
        OutcomeSpace(("a", "b"), (0.0,))


def test_pmf_new_binary(binary):
    p = pmf_new(binary, [0.3, 0.7])
    assert p["1"] == 0.7 and p["0"] == 0.3


def test_pmf_new_point_mass(three):
    p = pmf_new(three, [1, 0, 0])
    assert p == point_mass(three, "0")


def test_pmf_new_not_normalized(binary):
    with pytest.raises(NotNormalized):
        pmf_new(binary, [0.5, 0.6])


def test_pmf_new_negative(binary):
    with pytest.raises(NegativeWeight):
        pmf_new(binary, [-0.1, 1.1])


def test_pmf_new_silent_renormalization(binary):
    p = pmf_new(binary, [0.3, 0.7 + 5e-10])
    assert math.fsum(p.weights) == pytest.approx(1.0, abs=1e-15)


def test_pmf_new_length(binary):
    with pytest.raises(LengthMismatch):
        pmf_new(binary, [1.0])


def test_pmf_mean(three):
    assert pmf_new(three, [0.2, 0.5, 0.3]).mean() == pytest.approx(1.1)


# --- condition ---------------------------------------------------------------

def _three_records(binary):
    return dataset_from_rows(binary, [
        ("a", "1", {"pred": 0.7}, 1.0),
        ("b", "0", {"pred": 0.7}, 1.0),
        ("c", "1", {"pred": 0.2}, 1.0),
    ])


def test_condition_exact_counts(binary):
    # hand count: two records predict 0.7, one of each outcome
    p, w = condition(_three_records(binary), ConditionSpec("pred", 0.7))
    assert p.weights == (0.5, 0.5)
    assert w == pytest.approx(2 / 3, abs=1e-15)


def test_condition_empty_event(binary):
    with pytest.raises(EmptyEvent):
        condition(_three_records(binary), ConditionSpec("pred", 0.4))


def test_condition_sure_event_is_marginal(binary):
    ds = dataset_from_rows(binary, [("a", "1", {"pred": 0.5}, 2.0), ("b", "0", {"pred": 0.5}, 1.0)])
    p, w = condition(ds, ConditionSpec("pred", 0.5))
    assert p == ds.marginal() and w == 1.0


def test_condition_bins(binary):
    ds = dataset_from_rows(binary, [
        ("a", "1", {"pred": 0.71}, 1.0),
        ("b", "0", {"pred": 0.79}, 3.0),
        ("c", "1", {"pred": 0.81}, 1.0),
    ])
    p, w = condition(ds, ConditionSpec("pred", 0.75, bin_width=0.1))
    assert p.weights == (0.75, 0.25)
    assert w == pytest.approx(0.8)


def test_bin_policy_needs_real_value():
    with pytest.raises(KindMismatch):
        ConditionSpec("pred", "a", bin_width=0.1)


# --- mixture / total variation ----------------------------------------------

def test_mixture_symmetric(binary):
    m = mixture([point_mass(binary, "0"), point_mass(binary, "1")], [0.5, 0.5])
    assert m.weights == (0.5, 0.5)


def test_mixture_identity(three):
    p = pmf_new(three, [0.2, 0.5, 0.3])
    assert mixture([p], [1.0]) == p


def test_mixture_of_two_conditionals():
    # conditionals with means 1, 0 and second moment 5/4 on {-1, 0, 1, 2};
    # hand average: (13/48, 3/48, 27/48, 5/48)
    from calib_atlas.verify.scenarios import counterexample_mean_variance

    c1, c2 = counterexample_mean_variance(1.25).meta["conditionals"]
    sp = OutcomeSpace.numeric([-1, 0, 1, 2])
    m = mixture([pmf_new(sp, c1), pmf_new(sp, c2)], [0.5, 0.5])
    assert m.weights == pytest.approx((13 / 48, 3 / 48, 27 / 48, 5 / 48), abs=1e-15)


def test_mixture_space_mismatch(binary, three):
    with pytest.raises(SpaceMismatch):
        mixture([point_mass(binary, "0"), point_mass(three, "0")], [0.5, 0.5])


def test_tv_examples(binary):
    p = pmf_new(binary, [0.3, 0.7])
    assert total_variation(p, p) == 0.0
    assert total_variation(point_mass(binary, "0"), point_mass(binary, "1")) == 1.0
    assert total_variation(p, pmf_new(binary, [0.5, 0.5])) == pytest.approx(0.2, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(simplex(4), simplex(4), simplex(4))
def test_tv_is_a_metric(a, b, c):
    sp = OutcomeSpace(("a", "b", "c", "d"))
    p, q, r = (pmf_new(sp, x) for x in (a, b, c))
    assert total_variation(p, q) == pytest.approx(total_variation(q, p), abs=1e-15)
    assert total_variation(p, r) <= total_variation(p, q) + total_variation(q, r) + 1e-12
    assert (total_variation(p, q) <= 1e-12) == bool(np.allclose(p.array, q.array, atol=1e-12, rtol=0))


@settings(max_examples=200, deadline=None)
@given(simplex(3), simplex(3), simplex(3), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_mixture_grouping_order(a, b, c, s, t):
    sp = OutcomeSpace(("0", "1", "2"))
    p, q, r = (pmf_new(sp, x) for x in (a, b, c))
    flat = mixture([p, q, r], [s, (1 - s) * t, (1 - s) * (1 - t)])
    nested = mixture([p, mixture([q, r], [t, 1 - t])], [s, 1 - s])
    assert np.allclose(flat.array, nested.array, atol=1e-12, rtol=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_total_probability(seed):
    # condition on each level, mix back with the event weights: the marginal
    rng = np.random.default_rng(seed)
    sp = OutcomeSpace(("0", "1", "2"))
    n = int(rng.integers(1, 30))
    preds = rng.integers(0, 4, size=n) / 4
    ys = rng.integers(0, 3, size=n)
    ws = rng.uniform(0.1, 2.0, size=n)
    ds = dataset_from_rows(sp, [(i, str(ys[i]), {"f": float(preds[i])}, float(ws[i])) for i in range(n)])
    parts = [condition(ds, ConditionSpec("f", v)) for v in sorted(set(preds.tolist()))]
    total = math.fsum(w for _, w in parts)
    rebuilt = mixture([p for p, _ in parts], [w / total for _, w in parts])
    assert np.max(np.abs(rebuilt.array - ds.marginal().array)) <= 1e-12


# --- datasets ----------------------------------------------------------------

def test_dataset_rejects_empty(binary):
    with pytest.raises(EmptyDataset):
        PredictionDataset(binary, ())


def test_dataset_rejects_nonpositive_weight(binary):
    with pytest.raises(NegativeWeight):
        PredictionDataset(binary, (Record("a", "0", {}, {}, 0.0),))


def test_dataset_rejects_unknown_label(binary):
    with pytest.raises(KeyError):
        PredictionDataset(binary, (Record("a", "2", {}, {}, 1.0),))


def test_dataset_rejects_ragged_predictions(binary):
    with pytest.raises(KindMismatch):
        PredictionDataset(binary, (Record("a", "0", {"f": 0.1}), Record("b", "1", {})))


def test_levels_sorted(binary):
    ds = _three_records(binary)
    assert list(ds.levels("pred")) == [0.2, 0.7]


def test_lattice_pmf_is_exact(three):
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = lattice_pmf(three, rng, 64)
        assert all(Fraction(w).denominator <= 64 for w in p.weights)
        assert math.fsum(p.weights) == 1.0


def test_random_pmf_reproducible(three):
    a = random_pmf(three, np.random.default_rng(3))
    b = random_pmf(three, np.random.default_rng(3))
    assert a == b
