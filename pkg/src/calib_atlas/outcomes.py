"""Finite outcome spaces, probability mass functions and weighted datasets.

Everything here is immutable. A :class:`PredictionDataset` is the empirical
joint distribution of inputs, outcomes and predictions; conditioning on a
prediction value gives the outcome distribution on that event.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .errors import (
    EmptyDataset,
    EmptyEvent,
    EmptyGroup,
    KindMismatch,
    MissingEmbedding,
    LengthMismatch,
    MissingPrediction,
    NegativeWeight,
    NotNormalized,
    SpaceMismatch,
)

#: weights may dip below zero / exceed one by this much before we complain
WEIGHT_TOL = 1e-12
#: drift from unit mass that is silently renormalized
NORM_TOL = 1e-9


@dataclass(frozen=True)
class OutcomeSpace:
    """Ordered finite outcome set, optionally embedded in the reals."""

    labels: tuple[str, ...]
    embedding: tuple[float, ...] | None = None

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise LengthMismatch("an outcome space needs at least two labels")
        if len(set(labels)) != len(labels) or any(lab == "" for lab in labels):
            raise ValueError(f"labels must be unique and non-empty: {labels}")
        if self.embedding is not None:
            emb = tuple(float(v) for v in self.embedding)
            if len(emb) != len(labels):
                raise LengthMismatch(
                    f"embedding has {len(emb)} values for {len(labels)} labels"
                )
            object.__setattr__(self, "embedding", emb)

    def __len__(self) -> int:
        return len(self.labels)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"{label!r} is not an outcome label") from None

    def value(self, label: str) -> float:
        """Numeric embedding of ``label``."""
        if self.embedding is None:
            raise MissingEmbedding("outcome space has no numeric embedding")
        return self.embedding[self.index(label)]

    @property
    def values(self) -> np.ndarray:
        if self.embedding is None:
            raise MissingEmbedding("outcome space has no numeric embedding")
        return np.asarray(self.embedding, dtype=float)

    @classmethod
    def binary(cls) -> OutcomeSpace:
        return cls(("0", "1"), (0.0, 1.0))

    @classmethod
    def numeric(cls, values: Iterable[float]) -> OutcomeSpace:
        """Space whose labels are the printed values themselves."""
        vals = [float(v) for v in values]
        return cls(tuple(_fmt_number(v) for v in vals), tuple(vals))


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over an :class:`OutcomeSpace`.

    Use :func:`pmf_new` to build one from raw weights; the constructor only
    validates.
    """

    space: OutcomeSpace
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != len(self.space):
            raise LengthMismatch(
                f"{len(w)} weights for {len(self.space)} outcome labels"
            )
        for x in w:
            if not math.isfinite(x) or x < -WEIGHT_TOL or x > 1 + WEIGHT_TOL:
                raise NegativeWeight(f"weight {x!r} outside [0, 1]")
        total = math.fsum(w)
        if abs(total - 1.0) >= NORM_TOL:
            raise NotNormalized(f"weights sum to {total!r}")

    def __getitem__(self, label: str) -> float:
        return self.weights[self.space.index(label)]

    def __len__(self) -> int:
        return len(self.weights)

    @cached_property
    def array(self) -> np.ndarray:
        a = np.asarray(self.weights, dtype=float)
        a.flags.writeable = False
        return a

    def expect(self, g: Callable[[str], float] | Sequence[float]) -> float:
        """E[g(Y)] for a per-label function or vector."""
        if callable(g):
            g = [g(lab) for lab in self.space.labels]
        return float(np.dot(self.array, np.asarray(g, dtype=float)))

    def mean(self) -> float:
        return float(np.dot(self.array, self.space.values))

    def __repr__(self) -> str:
        inner = ", ".join(f"{lab}: {w:.6g}" for lab, w in zip(self.space.labels, self.weights))
        return f"Pmf({inner})"


def pmf_new(space: OutcomeSpace, weights: Sequence[float]) -> Pmf:
    """Validate ``weights`` and return a Pmf.

    Sums within 1e-9 of one are renormalized silently; anything further off
    raises :class:`NotNormalized`. Negative noise above -1e-12 is clipped.
    """
    if len(weights) != len(space):
        raise LengthMismatch(f"{len(weights)} weights for {len(space)} outcome labels")
    w = [float(x) for x in weights]
    for x in w:
        if not math.isfinite(x):
            raise NotNormalized(f"non-finite weight {x!r}")
        if x < -WEIGHT_TOL:
            raise NegativeWeight(f"negative weight {x!r}")
    w = [max(x, 0.0) for x in w]
    total = math.fsum(w)
    if abs(total - 1.0) >= NORM_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1")
    if total != 1.0:
        w = [x / total for x in w]
    return Pmf(space, tuple(w))


def point_mass(space: OutcomeSpace, label: str) -> Pmf:
    w = [0.0] * len(space)
    w[space.index(label)] = 1.0
    return Pmf(space, tuple(w))


def mixture(pmfs: Sequence[Pmf], weights: Sequence[float]) -> Pmf:
    """Convex combination of Pmfs sharing one outcome space."""
    if not pmfs or len(pmfs) != len(weights):
        raise LengthMismatch("need one weight per Pmf")
    space = pmfs[0].space
    if any(p.space != space for p in pmfs):
        raise SpaceMismatch("mixture components live on different spaces")
    lam = np.asarray(weights, dtype=float)
    if np.any(lam < 0):
        raise NegativeWeight("mixture weights must be non-negative")
    if abs(math.fsum(lam) - 1.0) >= NORM_TOL:
        raise NotNormalized(f"mixture weights sum to {math.fsum(lam)!r}")
    stacked = np.vstack([p.array for p in pmfs])
    return pmf_new(space, lam @ stacked)


def total_variation(p: Pmf, q: Pmf) -> float:
    """sup_A |p(A) - q(A)|, i.e. half the L1 distance."""
    if p.space != q.space:
        raise SpaceMismatch("total variation between different spaces")
    return 0.5 * math.fsum(abs(a - b) for a, b in zip(p.weights, q.weights))


def random_pmf(space: OutcomeSpace, rng: np.random.Generator) -> Pmf:
    """Uniform draw from the simplex (normalized exponentials)."""
    e = rng.exponential(size=len(space))
    return pmf_new(space, e / e.sum())


def lattice_pmf(space: OutcomeSpace, rng: np.random.Generator, denom: int = 64) -> Pmf:
    """Random Pmf whose weights are multiples of ``1/denom``.

    With a power-of-two ``denom`` and small-integer embeddings, linear
    functionals such as the mean are computed exactly in floating point, so
    distinct Pmfs can land on bitwise-identical property values.
    """
    cuts = np.sort(rng.integers(0, denom + 1, size=len(space) - 1))
    counts = np.diff(np.concatenate(([0], cuts, [denom])))
    return Pmf(space, tuple(float(c) / denom for c in counts))


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Record:
    """One weighted row of the empirical joint distribution.

    ``preds`` maps prediction names to values: floats for real-valued
    predictions, strings for tokens, tuples of labels for rankings and
    :class:`Pmf` for distributional predictions.
    """

    x_id: str
    y: str
    preds: Mapping[str, Any] = field(default_factory=dict)
    groups: Mapping[str, int] = field(default_factory=dict)
    weight: float = 1.0

    @property
    def dist_pred(self) -> Pmf | None:
        """The first distribution-valued prediction, if any."""
        for v in self.preds.values():
            if isinstance(v, Pmf):
                return v
        return None


@dataclass(frozen=True)
class PredictionDataset:
    space: OutcomeSpace
    records: tuple[Record, ...]
    name: str = "dataset"

    def __post_init__(self):
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        if not recs:
            raise EmptyDataset("a dataset needs at least one record")
        pnames = set(recs[0].preds)
        gnames = set(recs[0].groups)
        for i, r in enumerate(recs):
            if r.y not in self.space._index:
                raise KeyError(f"record {i}: outcome {r.y!r} is not a label")
            if not (r.weight > 0 and math.isfinite(r.weight)):
                raise NegativeWeight(f"record {i}: weight must be positive, got {r.weight!r}")
            if set(r.preds) != pnames or set(r.groups) != gnames:
                raise KindMismatch(f"record {i}: prediction/group names differ from record 0")
            for g, flag in r.groups.items():
                if flag not in (0, 1):
                    raise ValueError(f"record {i}: group {g} flag must be 0 or 1")
            for v in r.preds.values():
                if isinstance(v, Pmf) and v.space != self.space:
                    raise SpaceMismatch(f"record {i}: predicted Pmf on a different space")

    def __len__(self) -> int:
        return len(self.records)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([r.weight for r in self.records], dtype=float)

    @cached_property
    def y_index(self) -> np.ndarray:
        idx = self.space._index
        return np.array([idx[r.y] for r in self.records], dtype=int)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def prediction_names(self) -> tuple[str, ...]:
        return tuple(self.records[0].preds)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(self.records[0].groups)

    def values(self, name: str) -> list[Any]:
        if name not in self.records[0].preds:
            raise MissingPrediction(f"no prediction named {name!r}")
        return [r.preds[name] for r in self.records]

    def levels(self, name: str) -> dict[Any, np.ndarray]:
        """Record indices grouped by the exact value of prediction ``name``.

        Levels are returned in sorted order so downstream reports do not
        depend on record order.
        """
        buckets: dict[Any, list[int]] = {}
        for i, v in enumerate(self.values(name)):
            buckets.setdefault(v, []).append(i)
        keys = sorted(buckets, key=value_sort_key)
        return {k: np.asarray(buckets[k], dtype=int) for k in keys}

    def outcome_pmf(self, idx: np.ndarray | None = None) -> Pmf:
        """Weight-normalized outcome distribution over records ``idx``."""
        if idx is None:
            w, y = self.weights, self.y_index
        else:
            w, y = self.weights[idx], self.y_index[idx]
        counts = np.bincount(y, weights=w, minlength=len(self.space))
        total = counts.sum()
        if total <= 0:
            raise EmptyEvent("conditioning event has zero weight")
        return pmf_new(self.space, counts / total)

    def marginal(self) -> Pmf:
        return self.outcome_pmf()

    def subset(self, idx: Iterable[int], name: str | None = None) -> PredictionDataset:
        recs = tuple(self.records[i] for i in idx)
        return PredictionDataset(self.space, recs, name or self.name)

    def restrict(self, group: str, flag: int = 1) -> PredictionDataset:
        if group not in self.records[0].groups:
            raise MissingPrediction(f"no group named {group!r}")
        idx = [i for i, r in enumerate(self.records) if r.groups[group] == flag]
        if not idx:
            raise EmptyGroup(f"group {group}={flag} has no records")
        return self.subset(idx, f"{self.name}[{group}={flag}]")

    def with_prediction(self, name: str, fn: Callable[[Record], Any]) -> PredictionDataset:
        """Copy with an extra prediction ``fn(record)`` on every record."""
        recs = tuple(
            Record(r.x_id, r.y, {**r.preds, name: fn(r)}, r.groups, r.weight)
            for r in self.records
        )
        return PredictionDataset(self.space, recs, self.name)


def value_sort_key(v: Any):
    """Total order over prediction values of mixed kinds."""
    if isinstance(v, Pmf):
        return (3, v.weights)
    if isinstance(v, tuple):
        return (2, tuple(value_sort_key(x) for x in v))
    if isinstance(v, str):
        return (1, v)
    if isinstance(v, (int, float)):
        return (0, float(v))
    return (4, repr(v))


@dataclass(frozen=True)
class ConditionSpec:
    """Conditioning event ``f(X) = value`` (or same bin of width ``bin_width``)."""

    prediction_name: str
    value: Any
    bin_width: float | None = None

    def __post_init__(self):
        if self.bin_width is not None:
            if not self.bin_width > 0:
                raise ValueError("bin width must be positive")
            if not isinstance(self.value, (int, float)) or isinstance(self.value, bool):
                raise KindMismatch("bin policy only applies to real-valued predictions")

    def matches(self, v: Any) -> bool:
        if self.bin_width is None:
            return v == self.value
        if not isinstance(v, (int, float)):
            raise KindMismatch("bin policy only applies to real-valued predictions")
        return math.floor(v / self.bin_width) == math.floor(self.value / self.bin_width)


def condition(dataset: PredictionDataset, spec: ConditionSpec) -> tuple[Pmf, float]:
    """Empirical outcome distribution on the event named by ``spec``.

    Returns the conditional Pmf and the event's share of the dataset weight.
    Raises :class:`EmptyEvent` when no record matches.
    """
    vals = dataset.values(spec.prediction_name)
    idx = np.array([i for i, v in enumerate(vals) if spec.matches(v)], dtype=int)
    if idx.size == 0:
        raise EmptyEvent(f"no record has {spec.prediction_name} = {spec.value!r}")
    share = float(dataset.weights[idx].sum() / dataset.total_weight)
    return dataset.outcome_pmf(idx), share


def dataset_from_rows(
    space: OutcomeSpace,
    rows: Iterable[tuple],
    name: str = "dataset",
) -> PredictionDataset:
    """Build a dataset from ``(x_id, y, preds, weight[, groups])`` tuples,
    dropping rows of zero weight (handy for exact scenario construction)."""
    recs = []
    for row in rows:
        x_id, y, preds, weight = row[:4]
        groups = row[4] if len(row) > 4 else {}
        if weight == 0:
            continue
        recs.append(Record(str(x_id), y, dict(preds), dict(groups), float(weight)))
    return PredictionDataset(space, tuple(recs), name)
