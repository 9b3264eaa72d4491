"""Loss functions, identification functions and Bayes pairs.

A loss is evaluated pointwise as ``loss(label, value)``; expectations and
argmins over finite candidate grids are exhaustive, so the Bayes act is the
first grid value attaining the minimum.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import BadParam, EmptyGrid, KindMismatch, NotBinary, NotOriented, SpaceMismatch
from .outcomes import OutcomeSpace, Pmf, random_pmf
from .properties import DEFAULT_METRIC, Property, check_value_kind, value_distance


@dataclass(frozen=True, eq=False)
class LossFn:
    """Pointwise loss l(y, v) on ``space`` x values of ``value_kind``.

    ``bound_C`` is a declared bound on sup_v sum_y |l(y, v)|; ``quad_error``
    maps a value to the numerical-integration error bound of l at that value
    (only set for losses built by quadrature).
    """

    name: str
    fn: Callable[[str, Any], float]
    value_kind: str
    space: OutcomeSpace
    metric: str = ""
    bound_C: float | None = None
    grid: tuple | None = None
    quad_error: Callable[[float], float] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.metric:
            object.__setattr__(self, "metric", DEFAULT_METRIC[self.value_kind])
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(self.grid))

    def __call__(self, label: str, value: Any) -> float:
        return float(self.fn(label, value))

    def vector(self, value: Any) -> np.ndarray:
        """(l(y, value))_y in label order."""
        return _loss_vector(self, value)

    def __repr__(self) -> str:
        return f"LossFn({self.name!r})"


@lru_cache(maxsize=65536)
def _loss_vector(loss: LossFn, value: Any) -> np.ndarray:
    v = np.array([loss.fn(lab, value) for lab in loss.space.labels], dtype=float)
    v.flags.writeable = False
    return v


@lru_cache(maxsize=4096)
def loss_matrix(loss: LossFn, grid: tuple) -> np.ndarray:
    """L[y, j] = l(y, grid[j])."""
    if not grid:
        raise EmptyGrid(f"{loss.name}: empty candidate grid")
    m = np.column_stack([_loss_vector(loss, g) for g in grid])
    m.flags.writeable = False
    return m


def _check_space(loss: LossFn, p: Pmf) -> None:
    if p.space != loss.space:
        raise SpaceMismatch(f"{loss.name} is defined on a different outcome space")


def expected_loss(loss: LossFn, p: Pmf, v: Any) -> float:
    """E_{Y~p}[l(Y, v)]."""
    _check_space(loss, p)
    check_value_kind(loss.value_kind, v)
    return float(np.dot(p.array, _loss_vector(loss, v)))


def best_response(loss: LossFn, p: Pmf, grid: Sequence[Any]) -> tuple[Any, float]:
    """Exhaustive argmin of the expected loss over ``grid`` and the minimum.

    Ties go to the earliest grid value.
    """
    grid = tuple(grid)
    if not grid:
        raise EmptyGrid(f"{loss.name}: empty candidate grid")
    _check_space(loss, p)
    risks = p.array @ loss_matrix(loss, grid)
    j = int(np.argmin(risks))
    return grid[j], float(risks[j])


# ---------------------------------------------------------------------------
# catalog


def _endpoint_bound(space: OutcomeSpace, fn) -> float:
    # every catalog real loss is convex in the value, so sum_y |l(y, r)| over
    # r in [min y, max y] peaks at an endpoint
    y = space.values
    return max(sum(abs(fn(lab, float(r))) for lab in space.labels) for r in (y.min(), y.max()))


def squared_loss(space: OutcomeSpace, scale: float = 1.0) -> LossFn:
    """scale * (y - v)^2; the Bayes pair is (mean, scale * variance)."""
    y = dict(zip(space.labels, space.values))
    s = float(scale)

    def fn(lab, v):
        d = y[lab] - v
        return s * d * d

    return LossFn(
        "squared" if s == 1.0 else f"squared({s:g})", fn, "real", space,
        bound_C=_endpoint_bound(space, fn), params={"scale": s},
    )


def pinball_loss(space: OutcomeSpace, tau: float) -> LossFn:
    """Pinball loss; its lower argmin over the embedding is the tau-quantile."""
    if not 0.0 < tau < 1.0:
        raise BadParam(f"tau must lie in (0, 1), got {tau}")
    y = dict(zip(space.labels, space.values))
    t = float(tau)

    def fn(lab, v):
        d = y[lab] - v
        return t * d if d >= 0 else (t - 1.0) * d

    return LossFn(
        f"pinball({t:g})", fn, "real", space,
        bound_C=_endpoint_bound(space, fn),
        grid=tuple(sorted(set(space.values.tolist()))), params={"tau": t},
    )


def zero_one_loss(space: OutcomeSpace) -> LossFn:
    """Misclassification loss over the outcome labels; elicits the mode."""
    return LossFn(
        "zero_one", lambda lab, c: 0.0 if lab == c else 1.0, "token", space,
        bound_C=float(len(space) - 1), grid=space.labels,
    )


def make_simple_loss(q: float, space: OutcomeSpace) -> tuple[LossFn, Property]:
    """Cost-weighted misclassification loss with threshold ``q`` and the
    binary property it elicits.

    The second label of ``space`` is the positive outcome. Acts are the
    tokens ``"a"`` and ``"b"``; the grid lists ``"b"`` first so that a tie at
    P(1) = q resolves to b.
    """
    from .properties import make_standard_property

    if len(space) != 2:
        raise NotBinary("simple losses need a binary outcome space")
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise BadParam(f"q must lie in [0, 1], got {q}")
    neg, pos = space.labels

    def fn(lab, c):
        if c == "a":
            return q if lab == neg else 0.0
        if c == "b":
            return 1.0 - q if lab == pos else 0.0
        raise KindMismatch(f"simple loss acts are 'a' and 'b', got {c!r}")

    loss = LossFn(
        f"simple({q:g})", fn, "token", space,
        bound_C=2.0 * max(q, 1.0 - q), grid=("b", "a"), params={"q": q},
    )
    return loss, make_standard_property("simple_binary", space, q=q)


# ---------------------------------------------------------------------------
# identification functions


@dataclass(frozen=True, eq=False)
class IdentificationFn:
    """V(y, r) with regularity metadata.

    ``shape`` tells the loss construction how to integrate in r: ``affine``
    (exact antiderivative), ``piecewise_affine`` (affine between the
    per-outcome ``breakpoints``) or ``general`` (trapezoid rule).
    ``curvature_M2`` optionally bounds |d^2 V / dr^2| and tightens the
    trapezoid error bound.
    """

    name: str
    fn: Callable[[str, float], float]
    space: OutcomeSpace
    oriented: bool = True
    lipschitz_M: float | None = None
    nonconstant_N: float | None = None
    shape: str = "general"
    breakpoints: Callable[[str], Sequence[float]] | None = None
    params: dict = field(default_factory=dict)
    curvature_M2: float | None = None

    def __post_init__(self):
        if self.shape not in ("affine", "piecewise_affine", "general"):
            raise BadParam(f"unknown shape {self.shape!r}")
        if self.shape == "piecewise_affine" and self.breakpoints is None:
            raise BadParam("piecewise_affine identification needs breakpoints")
        n, m = self.nonconstant_N, self.lipschitz_M
        if n is not None and n <= 0 or m is not None and m <= 0:
            raise BadParam("N and M must be positive")
        if n is not None and m is not None and n > m:
            raise BadParam(f"N={n} exceeds M={m}")

    def __call__(self, label: str, r: float) -> float:
        return float(self.fn(label, r))

    def expected(self, p: Pmf, r: float) -> float:
        """V(P, r) = E_{Y~P} V(Y, r)."""
        return float(sum(w * self.fn(lab, r) for lab, w in zip(p.space.labels, p.weights)))


def make_identification(kind: str, space: OutcomeSpace, **params) -> IdentificationFn:
    """Oriented identification functions for catalog properties.

    ``mean``: r - y. ``quantile`` (tau): (1-tau)[y < r] - tau[y > r].
    ``ratio_of_expectations`` (g, h): h(y) r - g(y). ``variance_on_mean``
    (v): r - y^2 + v^2, valid on the mean level set v. ``cvar_on_quantile``
    (tau, v): r - v - max(0, y - v)/(1-tau), valid on the quantile level v.
    """
    y = dict(zip(space.labels, space.values)) if space.embedding is not None else None
    if y is None:
        raise BadParam("identification functions need a numeric embedding")
    if kind == "mean":
        return IdentificationFn(
            "mean", lambda lab, r: r - y[lab], space,
            lipschitz_M=1.0, nonconstant_N=1.0, shape="affine",
        )
    if kind == "quantile":
        tau = float(params.get("tau", 0.5))
        if not 0.0 < tau < 1.0:
            raise BadParam(f"tau must lie in (0, 1), got {tau}")

        def vq(lab, r):
            yy = y[lab]
            return (1.0 - tau) if yy < r else (-tau if yy > r else 0.0)

        return IdentificationFn(
            f"quantile({tau:g})", vq, space, shape="piecewise_affine",
            breakpoints=lambda lab: (y[lab],), params={"tau": tau},
        )
    if kind == "ratio_of_expectations":
        from .properties import _as_vector

        g = dict(zip(space.labels, _as_vector(space, params["g"], "g")))
        h = dict(zip(space.labels, _as_vector(space, params["h"], "h")))
        hmin, hmax = min(h.values()), max(h.values())
        if hmin <= 0:
            raise BadParam("h must be strictly positive")
        return IdentificationFn(
            "ratio_of_expectations", lambda lab, r: h[lab] * r - g[lab], space,
            lipschitz_M=hmax, nonconstant_N=hmin, shape="affine",
            params={"g": g, "h": h},
        )
    if kind == "variance_on_mean":
        v = float(params["v"])
        return IdentificationFn(
            f"variance|mean={v:g}", lambda lab, r: r - y[lab] ** 2 + v * v, space,
            lipschitz_M=1.0, nonconstant_N=1.0, shape="affine", params={"v": v},
        )
    if kind == "cvar_on_quantile":
        tau = float(params["tau"])
        v = float(params["v"])
        return IdentificationFn(
            f"cvar({tau:g})|quantile={v:g}",
            lambda lab, r: r - v - max(0.0, y[lab] - v) / (1.0 - tau), space,
            lipschitz_M=1.0, nonconstant_N=1.0, shape="affine",
            params={"tau": tau, "v": v},
        )
    raise BadParam(f"unknown identification kind {kind!r}")


def _integrate(V: IdentificationFn, lab: str, a: float, b: float, n_quad: int) -> float:
    """int_a^b V(lab, r) dr."""
    if a == b:
        return 0.0
    if V.shape == "affine":
        c0 = V.fn(lab, 0.0)
        c1 = V.fn(lab, 1.0) - c0
        return 0.5 * c1 * (b * b - a * a) + c0 * (b - a)
    if V.shape == "piecewise_affine":
        lo, hi = min(a, b), max(a, b)
        cuts = sorted(t for t in V.breakpoints(lab) if lo < t < hi)
        knots = [lo, *cuts, hi]
        # midpoint rule is exact on each affine piece
        total = math.fsum(
            (t1 - t0) * V.fn(lab, 0.5 * (t0 + t1)) for t0, t1 in zip(knots, knots[1:])
        )
        return total if b > a else -total
    xs = np.linspace(a, b, n_quad + 1)
    vals = np.array([V.fn(lab, float(x)) for x in xs])
    h = (b - a) / n_quad
    return float(h * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def loss_from_identification(
    V: IdentificationFn,
    gamma0: float,
    kappa: Callable[[str], float] | dict | None = None,
    n_quad: int = 64,
) -> LossFn:
    """l(y, g) = int_{gamma0}^{g} V(y, r) dr + kappa(y).

    Exact for affine and piecewise-affine V, composite trapezoid otherwise;
    ``quad_error(g)`` on the result bounds the quadrature error at g.
    Refuses non-oriented V, for which the result need not be consistent.
    """
    if not V.oriented:
        raise NotOriented(f"{V.name} is not oriented")
    if n_quad < 2:
        raise BadParam("n_quad must be at least 2")
    g0 = float(gamma0)
    if kappa is None:
        kap = lambda lab: 0.0  # noqa: E731
    elif isinstance(kappa, dict):
        kap = kappa.__getitem__
    else:
        kap = kappa

    def fn(lab, g):
        return _integrate(V, lab, g0, float(g), n_quad) + kap(lab)

    quad_error = None
    if V.shape == "general" and V.curvature_M2 is not None:
        m2 = V.curvature_M2
        quad_error = lambda g: m2 * abs(g - g0) ** 3 / (12.0 * n_quad**2)  # noqa: E731
    elif V.shape == "general" and V.lipschitz_M is not None:
        # Lipschitz integrand only: each panel of width h errs by at most M h^2 / 2
        m = V.lipschitz_M
        quad_error = lambda g: m * abs(g - g0) ** 2 / (2.0 * n_quad)  # noqa: E731
    elif V.shape != "general":
        quad_error = lambda g: 0.0  # noqa: E731
    return LossFn(
        f"loss[{V.name}]", fn, "real", V.space, quad_error=quad_error,
        params={"identification": V, "gamma0": g0, "n_quad": n_quad},
    )


# ---------------------------------------------------------------------------
# consistency and regularity checks


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    worst_gap: float
    witness: Pmf | None = None


def _comparable(prop: Property, loss: LossFn, v: Any) -> Any:
    # token-valued properties on an embedded space compare against a
    # real-valued loss through the embedding (e.g. the mode vs squared loss)
    if prop.kind == "token" and loss.value_kind == "real":
        return prop.space.value(v)
    return v


def check_consistency(
    loss: LossFn,
    prop: Property,
    n_trials: int,
    seed: int,
    grid: Sequence[Any] | None = None,
    pmfs: Sequence[Pmf] = (),
) -> ConsistencyResult:
    """Largest distance between the loss's Bayes act and the property value.

    Candidates are ``grid`` (default: the loss's or property's own grid);
    for real values the property value itself is added in front, so a
    consistent loss must prefer it to every grid point. ``pmfs`` are checked
    before the ``n_trials`` random draws.
    """
    grid = tuple(grid if grid is not None else (loss.grid or prop.grid or ()))
    rng = np.random.default_rng(seed)
    draws = list(pmfs) + [random_pmf(loss.space, rng) for _ in range(n_trials)]
    metric = "abs_diff" if loss.value_kind == "real" else prop.metric
    worst, witness = 0.0, None
    for p in draws:
        target = _comparable(prop, loss, prop(p))
        cands = ((target,) + grid) if loss.value_kind == "real" else grid
        act, _ = best_response(loss, p, cands)
        gap = value_distance(metric, act, target)
        if gap > worst:
            worst, witness = gap, p
    ok = worst <= 1e-6
    return ConsistencyResult(ok, worst, None if ok else witness)


@dataclass(frozen=True)
class BayesPair:
    loss: LossFn
    phi: Property
    theta: Property
    grid: tuple


def make_bayes_pair(loss: LossFn, grid: Sequence[Any]) -> BayesPair:
    """(argmin, min) of the expected loss over ``grid`` as two properties."""
    grid = tuple(grid)
    if not grid:
        raise EmptyGrid(f"{loss.name}: empty candidate grid")
    phi = Property(
        f"argmin[{loss.name}]", loss.value_kind,
        lambda p: best_response(loss, p, grid)[0], loss.metric, loss.space, grid=grid,
    )
    theta = Property(
        f"bayes_risk[{loss.name}]", "real",
        lambda p: best_response(loss, p, grid)[1], "abs_diff", loss.space,
    )
    return BayesPair(loss, phi, theta, grid)


@dataclass(frozen=True)
class RegularityEstimate:
    oriented_ok: bool
    N_hat: float
    M_hat: float
    n_pairs: int


def estimate_identification_regularity(
    V: IdentificationFn,
    prop: Property,
    n_trials: int,
    seed: int,
    gamma_grid: Sequence[float],
    pmfs: Sequence[Pmf] | None = None,
) -> RegularityEstimate:
    """Empirical envelope of |V(P, g)| / |g - Gamma(P)| and an orientation
    check, over sampled P and grid values g at least 1e-6 from Gamma(P)."""
    if prop.kind != "real":
        raise KindMismatch("regularity estimates need a real-valued property")
    rng = np.random.default_rng(seed)
    draws = list(pmfs) if pmfs is not None else [random_pmf(V.space, rng) for _ in range(n_trials)]
    labels = V.space.labels
    grid = np.asarray(list(gamma_grid), dtype=float)
    n_hat, m_hat, oriented, count = math.inf, 0.0, True, 0
    for p in draws:
        gp = prop(p)
        keep = grid[np.abs(grid - gp) > 1e-6]
        if keep.size == 0:
            continue
        vmat = np.array([[V.fn(lab, float(g)) for lab in labels] for g in keep])
        vp = vmat @ p.array
        d = keep - gp
        if np.any(np.sign(vp) != np.sign(d)):
            oriented = False
        ratio = np.abs(vp) / np.abs(d)
        n_hat = min(n_hat, float(ratio.min()))
        m_hat = max(m_hat, float(ratio.max()))
        count += keep.size
    return RegularityEstimate(oriented, n_hat, m_hat, count)
