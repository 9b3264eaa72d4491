"""Full distribution calibration recovered from binary hyperplane properties.

For every predicted point p of a finite-image forecaster we look for a
hyperplane through p that keeps every other predicted point at distance at
least epsilon. Shifting it by -/+ epsilon |a| / 2 gives two binary
properties that agree everywhere on the image except at p, so the gap
between their signed calibration sums isolates the level f = p.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SeparationFailure
from ..metrics import LevelResidualMap, distribution_calibration
from ..outcomes import OutcomeSpace, Pmf, pmf_new
from ..properties import Property, make_standard_property
from .edges import _dyadic_weights, random_pmf_array, spread_conditionals
from .scenarios import Scenario, build_dataset

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class Hyperplane:
    normal: tuple[float, ...]
    offset: float
    margin: float


@dataclass(frozen=True)
class HyperplaneCheck:
    point: Pmf
    plane: Hyperplane
    lower_residual: float
    upper_residual: float
    recovered_residual: float
    direct_residual: float
    flagged: bool


@dataclass(frozen=True)
class RecoveryResult:
    recovered: bool
    full_residual: float
    binary_ok: bool
    per_hyperplane: list[HyperplaneCheck] = field(default_factory=list)

    @property
    def flagged(self) -> list[Pmf]:
        return [c.point for c in self.per_hyperplane if c.flagged]


def _margin(a: np.ndarray, p: np.ndarray, others: np.ndarray) -> float:
    norm = float(np.linalg.norm(a))
    if norm == 0.0 or len(others) == 0:
        return np.inf if norm > 0 else 0.0
    return float(np.min(np.abs((others - p) @ a)) / norm)


def separating_hyperplane(
    points: list[np.ndarray],
    i: int,
    epsilon: float,
    seed: int = 0,
    n_random: int = 256,
) -> Hyperplane:
    """Hyperplane through ``points[i]`` with every other point at distance
    >= epsilon.

    Candidate normals live in the simplex's tangent space (sum zero): the
    differences q - p, directions orthogonal to a single difference, and
    random draws. The candidate with the largest minimum distance wins.
    """
    p = points[i]
    others = np.array([q for j, q in enumerate(points) if j != i]).reshape(-1, len(p))
    k = len(p)
    center = lambda v: v - v.mean()  # noqa: E731
    cands = [center(q - p) for q in others]
    for d in list(cands):
        # rotate each difference inside the tangent plane
        for e in np.eye(k):
            e = center(e)
            perp = e - (e @ d) / max(d @ d, 1e-300) * d
            if np.linalg.norm(perp) > 1e-12:
                cands.append(perp)
    rng = np.random.default_rng(seed)
    cands.extend(center(v) for v in rng.normal(size=(n_random, k)))
    best_a, best_m = None, -1.0
    for a in cands:
        m = _margin(a, p, others)
        if m > best_m:
            best_a, best_m = a, m
    if best_a is None or best_m < epsilon:
        worst = None
        if len(others):
            a = best_a if best_a is not None else np.ones(k)
            gaps = np.abs((others - p) @ a)
            j = int(np.argmin(gaps))
            worst = (i, j if j < i else j + 1)
        raise SeparationFailure(
            f"no hyperplane through point {i} keeps the others {epsilon:g} away "
            f"(best margin {best_m:.3g})",
            pair=worst,
        )
    a = best_a / np.linalg.norm(best_a)
    return Hyperplane(tuple(float(x) for x in a), float(a @ p), best_m)


def hyperplane_property(space: OutcomeSpace, plane: Hyperplane, shift: float, name: str) -> Property:
    """Binary property: "0" strictly above the plane shifted by ``shift``."""
    a = np.asarray(plane.normal)
    cut = plane.offset + shift

    def ev(p: Pmf) -> str:
        return "0" if float(a @ p.array) > cut else "1"

    return Property(name, "token", ev, "discrete", space, grid=("0", "1"))


def _signed_sum(cal: LevelResidualMap, level: str, k: int) -> np.ndarray:
    """Share-weighted signed component gaps on one level (zero if absent)."""
    for e in cal:
        if e.level == level:
            return e.weight * np.asarray(e.extra["signed"])
    return np.zeros(k)


def recover_distribution_calibration(
    scenario: Scenario,
    epsilon: float,
    dist_prediction_name: str = "dist_pred",
    tol: float = RESIDUAL_TOL,
    seed: int = 0,
) -> RecoveryResult:
    """Check full distribution calibration through 2 |im f| binary checks.

    ``recovered`` is true when "full residual is zero" and "every binary
    check is zero" agree. Each per-point entry also carries the level
    residual rebuilt from the two binary checks, next to the directly
    measured one.
    """
    ds = scenario.dataset
    sp = ds.space
    k = len(sp)
    full_prop = make_standard_property("full_distribution", sp)
    full = distribution_calibration(ds, dist_prediction_name, full_prop)
    points = [e.level for e in full]
    arrays = [p.array for p in points]
    checks = []
    binary_ok = True
    for i, p in enumerate(points):
        plane = separating_hyperplane(arrays, i, epsilon, seed=seed + i)
        half = epsilon * float(np.linalg.norm(plane.normal)) / 2.0
        lower = hyperplane_property(sp, plane, -half, f"plane{i}_lower")
        upper = hyperplane_property(sp, plane, +half, f"plane{i}_upper")
        lo_cal = distribution_calibration(ds, dist_prediction_name, lower)
        up_cal = distribution_calibration(ds, dist_prediction_name, upper)
        binary_ok = binary_ok and lo_cal.max() <= tol and up_cal.max() <= tol
        # {upper = "1"} is {lower = "1"} plus the single point p
        gap = _signed_sum(up_cal, "1", k) - _signed_sum(lo_cal, "1", k)
        share = full.entry(p).weight
        rec = float(np.max(np.abs(gap)) / share)
        checks.append(HyperplaneCheck(
            p, plane, lo_cal.max(), up_cal.max(), rec, full.entry(p).residual, rec > tol,
        ))
    full_ok = full.max() <= tol
    return RecoveryResult(full_ok == binary_ok, full.max(), binary_ok, checks)


def recovery_scenario(
    rng: np.random.Generator,
    n_points: int | None = None,
    perturb: float = 0.0,
    min_gap: float = 0.1,
) -> Scenario:
    """3-outcome scenario with a finite-image forecaster calibrated exactly
    level by level; ``perturb`` shifts one level's outcomes by
    perturb (e_a - e_b). ``meta["perturbed"]`` names the shifted point."""
    sp = OutcomeSpace(("0", "1", "2"), (0.0, 1.0, 2.0))
    n = n_points or int(rng.integers(3, 6))
    while True:
        # components >= 0.15 leave room for the planted shift
        pts = [0.15 + 0.55 * random_pmf_array(rng, 3) for _ in range(n)]
        gaps = [np.linalg.norm(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]]
        if min(gaps) >= min_gap:
            break
    pmfs = [pmf_new(sp, a) for a in pts]
    target = int(rng.integers(0, n)) if perturb else None
    shift = np.zeros(3)
    if perturb:
        a, b = rng.choice(3, size=2, replace=False)
        shift[a], shift[b] = perturb, -perturb
    blocks = []
    for i, p in enumerate(pmfs):
        n_x = int(rng.integers(1, 4))
        w = _dyadic_weights(rng, n_x)
        outs = spread_conditionals(rng, [p.array] * n_x, w, exact=True)
        for j, d in enumerate(outs):
            # pulling toward p keeps every component >= 0.105
            d = 0.3 * d + 0.7 * p.array
            if i == target:
                d = d + shift
            blocks.append((f"p{i}x{j}", float(w[j]), pmf_new(sp, np.clip(d, 0.0, None)),
                           {"dist_pred": p}, {}))
    ds = build_dataset(sp, blocks)
    meta = {"dist_pred": "dist_pred", "perturbed": pmfs[target] if target is not None else None}
    return Scenario(ds, {}, {}, {}, meta, "recovery" + ("_perturbed" if perturb else ""))
