"""(b, c)-contraction scan and ball projection diameter."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from cat0probe.classifiers.ladder import FLAT, FLAT_RATIO, GROWING, MIN_SLOPE, ladder_shape
from cat0probe.errors import InputError, PreconditionError
from cat0probe.metric_core import (
    seed_sequence,
    PathInSpace,
    SpaceGraph,
    _tol,
    is_geodesic,
    project_onto_path,
)

CONTRACTING, NOT_CONTRACTING, INCONCLUSIVE = "contracting", "not-contracting", "inconclusive"

# tier band around each ladder radius, as fractions of the radius
BAND = (0.9, 1.1)


@dataclass
class TierResult:
    radius: float
    c_hat: float
    samples: int
    witness: dict | None = None


@dataclass
class ContractionReport:
    b: float
    c_hat: float
    samples: int
    radius_ladder: list
    violation: dict | None
    verdict: str
    ratio: float = float("nan")
    slope: float = float("nan")
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class _Projector:
    """Projection data for one path, plus a displacement oracle."""

    def __init__(self, g: SpaceGraph, path: PathInSpace):
        self.g = g
        self.path = path
        self.dist, self.pos = project_onto_path(g, path)
        self.geodesic = is_geodesic(g, path)

    def foot(self, x: int) -> int:
        return int(self.path.vertices[self.pos[x]])

    def displacements(self, x: int, ys: np.ndarray) -> np.ndarray:
        """``d(pi(x), pi(y))`` for every ``y`` in ``ys``."""
        if self.geodesic:
            cum = self.path.cum_len
            return np.abs(cum[self.pos[ys]] - cum[self.pos[x]])
        d = self.g.distances_from(self.foot(x))
        return d[self.path.vertices[self.pos[ys]]]


def _tier_candidates(proj: _Projector, radius: float) -> np.ndarray:
    L = proj.path.length
    s = proj.path.cum_len[proj.pos]
    lo, hi = BAND[0] * radius, BAND[1] * radius
    ok = (proj.dist >= lo) & (proj.dist <= hi) & (s >= 0.25 * L) & (s <= 0.75 * L)
    return np.flatnonzero(ok)


# number of farthest-point picks that open every tier's sample order
SPREAD_PICKS = 16


def farthest_point_order(g: SpaceGraph, cand: np.ndarray, k: int, rng) -> np.ndarray:
    """Greedy farthest-point sample of ``k`` vertices from ``cand``.

    The first vertex is drawn from ``rng``; each next one maximizes the graph
    distance to those already chosen (smallest id on ties).
    """
    k = min(k, cand.size)
    chosen = [int(cand[rng.integers(cand.size)])]
    near = g.distances_from(chosen[0])[cand].copy()
    while len(chosen) < k:
        i = int(np.argmax(near))
        if near[i] <= 0:
            break
        chosen.append(int(cand[i]))
        near = np.minimum(near, g.distances_from(chosen[-1])[cand])
    return np.asarray(chosen, dtype=np.int64)


def sample_order(g: SpaceGraph, cand: np.ndarray, k: int, rng) -> np.ndarray:
    """First ``k`` entries of a prefix-stable visiting order of ``cand``.

    A short farthest-point prefix reaches thin regions that volume growth
    would otherwise drown out; a seeded permutation of the rest follows.
    """
    head = farthest_point_order(g, cand, min(k, SPREAD_PICKS), rng)
    rest = np.setdiff1d(cand, head)
    return np.concatenate([head, rng.permutation(rest)])[:k]


def _scan_x(proj: _Projector, x: int, b: float):
    D = float(proj.dist[x])
    rad = b * D
    ys, d = proj.g.ball(x, rad - _tol(rad))
    disp = proj.displacements(x, ys)
    k = int(np.argmax(disp))
    y = int(ys[k])
    return float(disp[k]), {
        "x": int(x), "y": y, "pi_x": proj.foot(x), "pi_y": proj.foot(y),
        "d_xy": float(d[k]), "d_x_path": D, "d_proj": float(disp[k]),
    }


def contraction_scan(g: SpaceGraph, path: PathInSpace, b: float, budget: int, radius_ladder,
                     seed, flat_ratio: float = FLAT_RATIO, min_slope: float = MIN_SLOPE) -> ContractionReport:
    """Empirical (b, c)-contraction test on a ladder of distances from ``path``.

    Tier ``R`` takes up to ``budget // len(radius_ladder)`` vertices ``x``
    at distance ``[0.9R, 1.1R]`` from the path whose projection lies in the
    middle half of the path, visited in the order of :func:`sample_order`;
    for each ``x`` every vertex ``y`` of the open
    ball of radius ``b d(x, path)`` is examined.  ``c_hat`` per tier is the
    largest ``d(pi(x), pi(y))`` seen.  The tier values are classified with
    :func:`~cat0probe.classifiers.ladder.ladder_shape` using a floor of
    ``2 * scale_h``.
    """
    if len(path) < 1:
        raise InputError("path must be nonempty")
    if not (0 < b <= 1):
        raise InputError("b must lie in (0, 1]")
    ladder = [float(r) for r in radius_ladder]
    if len(ladder) < 2 or any(r <= 0 for r in ladder) or sorted(set(ladder)) != ladder:
        raise InputError("radius_ladder needs at least two increasing positive radii")
    per_tier = budget // len(ladder)
    if per_tier < 1:
        raise InputError("budget must allow at least one sample per tier")

    proj = _Projector(g, path)
    streams = seed_sequence(seed).spawn(len(ladder))
    tiers, notes = [], []
    for R, ss in zip(ladder, streams):
        cand = _tier_candidates(proj, R)
        if cand.size == 0:
            notes.append(f"tier {R:g}: no vertex at distance {BAND[0]}R..{BAND[1]}R with a central projection")
            tiers.append(TierResult(R, float("nan"), 0))
            continue
        rng = np.random.default_rng(ss)
        xs = sample_order(g, cand, per_tier, rng)
        best, wit = -1.0, None
        for x in xs:
            c, w = _scan_x(proj, int(x), b)
            if c > best:
                best, wit = c, w
        tiers.append(TierResult(R, best, int(xs.size), wit))

    samples = sum(t.samples for t in tiers)
    finite = [t for t in tiers if t.samples]
    c_hat = max((t.c_hat for t in finite), default=float("nan"))
    report = ContractionReport(b=b, c_hat=c_hat, samples=samples,
                               radius_ladder=[asdict(t) for t in tiers], violation=None,
                               verdict=INCONCLUSIVE, notes=notes)
    if len(finite) < len(tiers):
        return report
    fit = ladder_shape([t.radius for t in tiers], [t.c_hat for t in tiers], 2 * g.scale_h,
                       flat_ratio, min_slope)
    report.ratio, report.slope = fit.ratio, fit.slope
    if fit.shape == FLAT:
        report.verdict = CONTRACTING
    elif fit.shape == GROWING:
        report.verdict = NOT_CONTRACTING
        top = max(finite, key=lambda t: t.c_hat)
        report.violation = dict(top.witness)
    else:
        notes.append(f"c_hat neither flat (ratio {fit.ratio:.3g}) nor growing (slope {fit.slope:.3g})")
    return report


def ball_projection_diameter(g: SpaceGraph, path: PathInSpace, center, radius: float) -> float:
    """Arclength spread of the projections of the closed ball ``B(center, radius)``."""
    center = g.check_vertex(center)
    if radius < 0:
        raise InputError("radius must be nonnegative")
    dist, pos = project_onto_path(g, path)
    if not dist[center] > radius:
        raise PreconditionError(f"ball of radius {radius} meets the path (distance {dist[center]:.6g})")
    ball, _ = g.ball(center, radius + _tol(radius) + 1e-12)
    s = path.cum_len[pos[ball]]
    return float(s.max() - s.min())
