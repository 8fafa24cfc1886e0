"""Morse stability: the closed-form bound for contracting paths and an adversary."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from cat0probe.classifiers.contraction import CONTRACTING, ContractionReport, sample_order
from cat0probe.classifiers.ladder import FLAT, FLAT_RATIO, GROWING, MIN_SLOPE, ladder_shape
from cat0probe.errors import InputError
from cat0probe.metric_core import (
    seed_sequence,
    PathInSpace,
    QuasiGeodesicConstants,
    SpaceGraph,
    concat_paths,
    point_at_arclength,
    project_onto_path,
    shortest_path,
    verify_quasi_geodesic,
)

MORSE, NOT_MORSE, INCONCLUSIVE = "morse-at-scale", "not-morse", "inconclusive"

# relative margin on c_hat when a contraction report feeds the bound
C_HAT_MARGIN = 1.1


def morse_bound(b: float, c: float, K: float, L: float) -> float:
    """Distance bound for (K, L) quasi-geodesics with endpoints on a (b, c)-contracting path.

    With ``D = max(K, L, 1)`` and ``A = 2 (1 + c D) / b``, the number of
    steps satisfies ``m < D (2A + 2L + c + 1)`` and the bound is
    ``D (2A + 2L + c m + c + 1) + A + L`` evaluated at that ``m``.
    """
    if not (0 < b <= 1):
        raise InputError("b must lie in (0, 1]")
    if not c > 0:
        raise InputError("c must be positive")
    if not (K >= 1 and L >= 0):
        raise InputError("need K >= 1 and L >= 0")
    D = max(K, L, 1.0)
    A = 2.0 * (1.0 + c * D) / b
    m = D * (2.0 * A + 2.0 * L + c + 1.0)
    return D * (2.0 * A + 2.0 * L + c * m + c + 1.0) + A + L


@dataclass
class ScaleResult:
    scale: float
    wander: float
    candidates_validated: int
    witness: list
    validation_pairs: int
    validation_seed: int


@dataclass
class MorseReport:
    constants: dict
    scales: list
    worst_wander: list
    per_scale: list
    bound_from_lemma: float | None
    verdict: str
    ratio: float = float("nan")
    slope: float = float("nan")
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def tent(g: SpaceGraph, a: int, z: int, b: int) -> PathInSpace:
    """Geodesic from ``a`` to ``z`` followed by the geodesic from ``z`` to ``b``."""
    return concat_paths(shortest_path(g, a, z), shortest_path(g, z, b))


def _validation_pairs(p: PathInSpace, cap: int | None) -> int:
    # a grid of about one parameter per vertex checks every vertex pair
    n = max(len(p), 2) ** 2
    return n if cap is None else min(n, cap)


class _Adversary:
    def __init__(self, g, path, k, dist, pos, pair_cap, vseed):
        self.g, self.path, self.k = g, path, k
        self.dist, self.pos = dist, pos
        self.pair_cap, self.vseed = pair_cap, vseed
        self.validated = 0

    def valid(self, cand: PathInSpace) -> bool:
        n = _validation_pairs(cand, self.pair_cap)
        self.validated += 1
        return verify_quasi_geodesic(self.g, cand, self.k, n, self.vseed, exact_margin=False).holds

    def wander(self, cand: PathInSpace) -> float:
        return float(self.dist[cand.vertices].max())

    def grow(self, a: int, b: int, ray: PathInSpace):
        """Largest valid tent apex along ``ray`` (binary search on its vertices)."""
        first = tent(self.g, a, int(ray.vertices[0]), b)
        if not self.valid(first):
            return None
        lo, hi = 0, len(ray) - 1
        best = first
        while lo < hi:
            mid = (lo + hi + 1) // 2
            cand = tent(self.g, a, int(ray.vertices[mid]), b)
            if self.valid(cand):
                lo, best = mid, cand
            else:
                hi = mid - 1
        return best


def morse_adversarial_search(g: SpaceGraph, path: PathInSpace, K: float, L: float, scales, budget: int,
                             seed, contraction: ContractionReport | None = None,
                             pair_cap: int | None = None, flat_ratio: float = FLAT_RATIO,
                             min_slope: float = MIN_SLOPE) -> MorseReport:
    """Search for (K, L) quasi-geodesics with endpoints on ``path`` that wander far from it.

    For each scale ``s`` the endpoints sit at arclength ``mid -+ s/2``.  Each
    of ``budget`` restarts takes a vertex ``w`` whose projection falls
    between the endpoints (in the order of
    :func:`~cat0probe.classifiers.contraction.sample_order`), then grows a tent (two geodesic legs meeting at
    an apex) along the geodesic from the projection of ``w`` towards ``w``
    for as long as the tent stays a (K, L) quasi-geodesic.  Every candidate
    is validated with :func:`verify_quasi_geodesic`, by default on a
    parameter grid as fine as the candidate's vertex count.

    Wander per scale is classified like contraction tiers (floor
    ``2 * scale_h``).  When ``contraction`` reports a contracting path, the
    bound ``morse_bound(b, max(1.1 c_hat, scale_h), K, L)`` is attached.
    """
    k = QuasiGeodesicConstants(K, L)
    scales = [float(s) for s in scales]
    if len(scales) < 2 or sorted(set(scales)) != scales or scales[0] < 0:
        raise InputError("scales must be at least two increasing nonnegative values")
    if budget < 1:
        raise InputError("budget must be >= 1")
    mid = path.length / 2
    if scales[-1] / 2 > mid:
        raise InputError(f"scale {scales[-1]:g} exceeds the path length {path.length:g}")
    dist, pos = project_onto_path(g, path)
    foot_s = path.cum_len[pos]
    streams = seed_sequence(seed).spawn(len(scales))

    per_scale, notes = [], []
    for s, ss in zip(scales, streams):
        rng = np.random.default_rng(ss)
        vseed = int(rng.integers(2 ** 31))
        adv = _Adversary(g, path, k, dist, pos, pair_cap, vseed)
        a = point_at_arclength(path, mid - s / 2)
        b = point_at_arclength(path, mid + s / 2)
        best = shortest_path(g, a, b) if a != b else PathInSpace(np.array([a]), np.array([0.0]))
        if not adv.valid(best):
            best = None
        if s > 0:
            pool = np.flatnonzero((foot_s >= mid - s / 2) & (foot_s <= mid + s / 2) & (dist > 0))
            for w in sample_order(g, pool, budget, rng) if pool.size else []:
                ray = shortest_path(g, int(path.vertices[pos[w]]), int(w))
                cand = adv.grow(a, b, ray)
                if cand is not None and (best is None or adv.wander(cand) > adv.wander(best)):
                    best = cand
        if best is None:
            notes.append(f"scale {s:g}: no valid candidate")
            per_scale.append(ScaleResult(s, float("nan"), adv.validated, [], 0, vseed))
            continue
        per_scale.append(ScaleResult(s, adv.wander(best), adv.validated,
                                     [int(v) for v in best.vertices],
                                     _validation_pairs(best, pair_cap), vseed))

    bound = None
    if contraction is not None and contraction.verdict == CONTRACTING:
        c_eff = max(C_HAT_MARGIN * contraction.c_hat, g.scale_h)
        bound = morse_bound(contraction.b, c_eff, K, L)

    wander = [r.wander for r in per_scale]
    report = MorseReport(constants={"K": K, "L": L}, scales=scales, worst_wander=wander,
                         per_scale=[asdict(r) for r in per_scale], bound_from_lemma=bound,
                         verdict=INCONCLUSIVE, notes=notes)
    if any(math.isnan(w) for w in wander):
        return report
    fit = ladder_shape(scales, wander, 2 * g.scale_h, flat_ratio, min_slope)
    report.ratio, report.slope = fit.ratio, fit.slope
    if fit.shape == FLAT:
        report.verdict = MORSE
    elif fit.shape == GROWING:
        report.verdict = NOT_MORSE
    else:
        notes.append(f"wander neither flat (ratio {fit.ratio:.3g}) nor growing (slope {fit.slope:.3g})")
    return report
