"""Properties: maps from outcome distributions to a metric value space.

Values are plain Python objects tagged by the property's ``kind``:

* ``real``          -> float, compared with ``abs_diff``
* ``token``         -> str, compared with ``discrete``
* ``ranking``       -> tuple of labels, compared with ``discrete``
* ``distribution``  -> :class:`Pmf`, compared with ``total_variation``
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    BadParam,
    KindMismatch,
    MissingEmbedding,
    NotBinary,
    RejectionBudgetExceeded,
    SpaceMismatch,
)
from .outcomes import OutcomeSpace, Pmf, mixture, point_mass, random_pmf, total_variation

KINDS = ("real", "token", "ranking", "distribution")
METRICS = ("abs_diff", "discrete", "total_variation")
DEFAULT_METRIC = {
    "real": "abs_diff",
    "token": "discrete",
    "ranking": "discrete",
    "distribution": "total_variation",
}

# quantile CDF comparison slack; keeps the lower quantile stable when the
# cumulative sum lands a hair below tau through rounding
_CDF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Property:
    """A property Gamma with its value metric.

    ``grid`` is an optional finite candidate set used by argmin searches.
    ``lipschitz`` is the declared Lipschitz constant with respect to total
    variation on the simplex and ``metric`` on the value space (None when the
    property is not Lipschitz, e.g. any discrete property).
    """

    name: str
    kind: str
    evaluator: Callable[[Pmf], Any]
    metric: str
    space: OutcomeSpace | None = None
    grid: tuple | None = None
    lipschitz: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadParam(f"unknown value kind {self.kind!r}")
        if self.metric not in METRICS:
            raise BadParam(f"unknown metric {self.metric!r}")
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(self.grid))

    def __call__(self, p: Pmf) -> Any:
        return evaluate(self, p)

    def __repr__(self) -> str:
        return f"Property({self.name!r}, kind={self.kind}, metric={self.metric})"


def evaluate(prop: Property, p: Pmf) -> Any:
    if prop.space is not None and p.space != prop.space:
        raise SpaceMismatch(f"{prop.name} is defined on a different outcome space")
    return prop.evaluator(p)


def value_distance(metric: str, a: Any, b: Any) -> float:
    if metric == "abs_diff":
        if not (_is_real(a) and _is_real(b)):
            raise KindMismatch(f"abs_diff compares reals, got {a!r} and {b!r}")
        return abs(float(a) - float(b))
    if metric == "discrete":
        if not (isinstance(a, (str, tuple)) and isinstance(b, (str, tuple))):
            raise KindMismatch(f"discrete metric compares tokens/rankings, got {a!r} and {b!r}")
        return 0.0 if a == b else 1.0
    if metric == "total_variation":
        if not (isinstance(a, Pmf) and isinstance(b, Pmf)):
            raise KindMismatch("total_variation compares Pmfs")
        return total_variation(a, b)
    raise BadParam(f"unknown metric {metric!r}")


def _is_real(v: Any) -> bool:
    return isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)


def check_value_kind(kind: str, v: Any) -> None:
    ok = {
        "real": _is_real(v),
        "token": isinstance(v, str),
        "ranking": isinstance(v, tuple),
        "distribution": isinstance(v, Pmf),
    }.get(kind, False)
    if not ok:
        raise KindMismatch(f"value {v!r} is not of kind {kind}")


# ---------------------------------------------------------------------------
# catalog


def _need_embedding(space: OutcomeSpace, kind: str) -> np.ndarray:
    if space.embedding is None:
        raise MissingEmbedding(f"{kind} needs a numeric embedding of the outcomes")
    return space.values


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise BadParam(f"tau must lie in (0, 1), got {tau}")
    return tau


def lower_quantile(values: np.ndarray, weights: np.ndarray, tau: float) -> float:
    """Smallest value v with P(Y <= v) >= tau."""
    order = np.argsort(values, kind="stable")
    cdf = 0.0
    for i in order:
        cdf += weights[i]
        if cdf >= tau - _CDF_TOL:
            return float(values[i])
    return float(values[order[-1]])


def _as_vector(space: OutcomeSpace, fn, what: str) -> np.ndarray:
    if callable(fn):
        vals = [fn(space.value(lab)) if space.embedding is not None else fn(lab)
                for lab in space.labels]
    elif isinstance(fn, dict):
        vals = [fn[lab] for lab in space.labels]
    else:
        vals = list(fn)
    if len(vals) != len(space):
        raise BadParam(f"{what} needs one value per outcome")
    return np.asarray(vals, dtype=float)


def make_standard_property(kind: str, space: OutcomeSpace, **params) -> Property:
    """Build a catalog property on ``space``.

    ``kind`` is one of ``mean``, ``quantile`` (tau), ``mode``, ``ranking``,
    ``variance``, ``cvar`` (tau), ``ratio_of_expectations`` (g, h),
    ``simple_binary`` (q), ``full_distribution``. For the ratio, ``g`` and
    ``h`` are per-outcome vectors, label dicts, or callables of the embedded
    value.
    """
    labels = space.labels
    if kind == "mean":
        y = _need_embedding(space, kind)
        rng_y = float(y.max() - y.min())
        return Property(
            "mean", "real", lambda p: float(np.dot(p.array, y)), "abs_diff",
            space, lipschitz=rng_y,
        )

    if kind == "variance":
        y = _need_embedding(space, kind)
        r = float(y.max() - y.min())

        def var(p: Pmf) -> float:
            mu = float(np.dot(p.array, y))
            return float(np.dot(p.array, (y - mu) ** 2))

        return Property("variance", "real", var, "abs_diff", space, lipschitz=1.25 * r * r)

    if kind == "quantile":
        y = _need_embedding(space, kind)
        tau = _check_tau(params.get("tau", 0.5))
        return Property(
            f"quantile({tau:g})", "real",
            lambda p: lower_quantile(y, p.array, tau), "abs_diff", space,
            grid=tuple(sorted(set(float(v) for v in y))),
            lipschitz=None, params={"tau": tau},
        )

    if kind == "cvar":
        y = _need_embedding(space, kind)
        tau = _check_tau(params.get("tau", 0.5))
        r = float(y.max() - y.min())

        def cvar(p: Pmf) -> float:
            v = lower_quantile(y, p.array, tau)
            return v + float(np.dot(p.array, np.maximum(0.0, y - v))) / (1.0 - tau)

        return Property(
            f"cvar({tau:g})", "real", cvar, "abs_diff", space,
            lipschitz=r / (1.0 - tau), params={"tau": tau},
        )

    if kind == "ratio_of_expectations":
        if "g" not in params or "h" not in params:
            raise BadParam("ratio_of_expectations needs g and h")
        g = _as_vector(space, params["g"], "g")
        h = _as_vector(space, params["h"], "h")
        n_h = float(params.get("N_h", h.min()))
        m_h = float(params.get("M_h", h.max()))
        if not (n_h > 0 and np.all(h >= n_h) and np.all(h <= m_h)):
            raise BadParam(f"h must satisfy 0 < N_h <= h <= M_h, got h in [{h.min()}, {h.max()}]")
        k = (float(g.max() - g.min()) + float(np.abs(g).max()) * float(h.max() - h.min()) / n_h) / n_h
        return Property(
            "ratio_of_expectations", "real",
            lambda p: float(np.dot(p.array, g)) / float(np.dot(p.array, h)),
            "abs_diff", space, lipschitz=k,
            params={"g": tuple(g), "h": tuple(h), "N_h": n_h, "M_h": m_h},
        )

    if kind == "mode":
        # np.argmax returns the first maximal index, i.e. label order breaks ties
        return Property(
            "mode", "token", lambda p: labels[int(np.argmax(p.array))], "discrete",
            space, grid=labels,
        )

    if kind == "ranking":
        def rank(p: Pmf) -> tuple:
            order = sorted(range(len(labels)), key=lambda i: -p.weights[i])
            return tuple(labels[i] for i in order)

        grid = tuple(itertools.permutations(labels)) if len(labels) <= 6 else None
        return Property("ranking", "ranking", rank, "discrete", space, grid=grid)

    if kind == "simple_binary":
        if len(space) != 2:
            raise NotBinary("simple_binary needs a binary outcome space")
        q = float(params.get("q", 0.5))
        if not 0.0 <= q <= 1.0:
            raise BadParam(f"q must lie in [0, 1], got {q}")
        # the positive outcome is the second label; boundary P(1) = q goes to b
        return Property(
            f"simple_binary({q:g})", "token",
            lambda p: "a" if p.weights[1] > q else "b", "discrete", space,
            grid=("b", "a"), params={"q": q},
        )

    if kind == "full_distribution":
        return Property(
            "full_distribution", "distribution", lambda p: p, "total_variation",
            space, lipschitz=1.0,
        )

    raise BadParam(f"unknown property kind {kind!r}")


def refine(
    gamma: Property,
    phi_map: Callable[[Any], Any],
    new_metric: str,
    name: str,
    kind: str | None = None,
    lipschitz: float | None = None,
) -> Property:
    """The refined property phi o Gamma.

    ``kind`` defaults to the natural kind of ``new_metric`` (``discrete``
    means token). ``lipschitz`` is the declared constant of the composite, if
    any; it is never inferred.
    """
    if kind is None:
        kind = {"abs_diff": "real", "discrete": "token", "total_variation": "distribution"}[new_metric]
    grid = None
    if gamma.grid is not None:
        seen: dict = {}
        for v in gamma.grid:
            seen.setdefault(phi_map(v), None)
        grid = tuple(seen)
    inner = gamma.evaluator
    return Property(
        name, kind, lambda p: phi_map(inner(p)), new_metric, gamma.space,
        grid=grid, lipschitz=lipschitz,
        params={"refines": gamma.name},
    )


# ---------------------------------------------------------------------------
# level-set convexity


@dataclass(frozen=True)
class ConvexityResult:
    convex: bool
    witness: tuple[Pmf, Pmf, float] | None = None
    trials: int = 0


def _bisect_level(prop: Property, target: float, lo: Pmf, hi: Pmf, iters: int = 200) -> Pmf | None:
    """Point on the segment [lo, hi] whose value equals ``target``.

    Needs Gamma(lo) <= target <= Gamma(hi) and Gamma continuous along the
    segment; returns None when the bracket does not close to 1e-12.
    """
    a, b = 0.0, 1.0
    lo_a, hi_a = lo.array, hi.array
    for _ in range(iters):
        m = 0.5 * (a + b)
        pm = Pmf(lo.space, tuple((1 - m) * lo_a + m * hi_a))
        v = prop.evaluator(pm)
        if abs(v - target) <= 1e-12:
            return pm
        if v < target:
            a = m
        else:
            b = m
        if b - a < 1e-16:
            break
    return None


def _find_partner(prop: Property, p: Pmf, gp: Any, rng: np.random.Generator, budget: int) -> Pmf | None:
    space = p.space
    if prop.kind == "distribution":
        # level sets are singletons; the only partner is p itself
        return p
    below = above = None
    # vertices first: extreme values of real properties often sit there
    vertices = [point_mass(space, lab) for lab in space.labels] if prop.kind == "real" else []
    for i in range(budget):
        q = vertices[i] if i < len(vertices) else random_pmf(space, rng)
        gq = prop.evaluator(q)
        if value_distance(prop.metric, gp, gq) <= 1e-12 and q != p:
            return q
        if prop.kind == "real":
            if gq < gp and below is None:
                below = q
            elif gq > gp and above is None:
                above = q
            if below is not None and above is not None:
                found = _bisect_level(prop, gp, below, above)
                if found is not None:
                    return found
                below = above = None
    return None


def level_set_convexity_check(
    prop: Property,
    n_trials: int,
    seed: int,
    space: OutcomeSpace | None = None,
    budget: int = 2000,
) -> ConvexityResult:
    """Randomized search for a non-convex level set.

    Each trial draws p uniformly from the simplex, finds a partner q with the
    same value (rejection sampling; real-valued properties fall back to
    bisection between a lower and an upper draw), and tests lambda = 1/2 and
    one uniform lambda. ``convex=True`` only means no counterexample was found.
    """
    if n_trials < 1:
        raise BadParam("n_trials must be at least 1")
    space = space or prop.space
    if space is None:
        raise BadParam("convexity check needs an outcome space")
    rng = np.random.default_rng(seed)
    for t in range(n_trials):
        p = random_pmf(space, rng)
        gp = prop.evaluator(p)
        q = _find_partner(prop, p, gp, rng, budget)
        if q is None:
            raise RejectionBudgetExceeded(
                f"{prop.name}: no equal-value partner found in {budget} draws (trial {t})"
            )
        for lam in (0.5, float(rng.uniform(0.0, 1.0))):
            m = mixture([p, q], [lam, 1.0 - lam])
            if value_distance(prop.metric, prop.evaluator(m), gp) > 1e-9:
                return ConvexityResult(False, (p, q, lam), t + 1)
    return ConvexityResult(True, None, n_trials)


def mean_grid(space: OutcomeSpace, n: int = 101, extra: Sequence[float] = ()) -> tuple[float, ...]:
    """Evenly spaced grid over the embedding range plus ``extra`` points."""
    y = _need_embedding(space, "grid")
    pts = set(float(v) for v in np.linspace(y.min(), y.max(), n))
    pts.update(float(v) for v in extra)
    return tuple(sorted(pts))


def is_finite_real(v: Any) -> bool:
    return _is_real(v) and math.isfinite(float(v))
