"""Divergence profile: detour length around a ball centered on the path."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cat0probe.errors import InputError
from cat0probe.metric_core import (
    UNREACHABLE,
    PathInSpace,
    SpaceGraph,
    point_at_arclength,
    punctured_distance,
)
from cat0probe.space_zoo import INFINITE, LINEAR, QUADRATIC, SUPERLINEAR

INCONCLUSIVE = "inconclusive"
INFINITY = math.inf

# exponent thresholds between growth classes
LINEAR_BELOW = 1.3
QUADRATIC_FROM = 1.8


@dataclass
class DivergenceProfile:
    radii: list
    detour: list
    fit_exponent: float = float("nan")
    fit_quality: float = float("nan")
    growth_class: str = INCONCLUSIVE
    effective_radii: list = field(default_factory=list)
    center: int = -1

    def to_dict(self) -> dict:
        def num(v):
            return "UNREACHABLE" if v == UNREACHABLE else v
        return {
            "radii": list(self.radii),
            "effective_radii": list(self.effective_radii),
            "detour": [num(v) for v in self.detour],
            "fit_exponent": "INFINITY" if self.fit_exponent == INFINITY else self.fit_exponent,
            "fit_quality": self.fit_quality,
            "class": self.growth_class,
            "center": self.center,
        }


def _loglog(radii, detour):
    x = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(detour, dtype=float))
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icept), r2


def classify_exponent(exponent: float) -> str:
    if exponent == INFINITY:
        return INFINITE
    if exponent < LINEAR_BELOW:
        return LINEAR
    if exponent >= QUADRATIC_FROM:
        return QUADRATIC
    return SUPERLINEAR


def fit_growth(profile: DivergenceProfile):
    """Return ``(exponent, class)`` from a least-squares fit of log detour on log r.

    An unreachable detour at the second radius or later means infinite
    divergence.  Fewer than four finite points otherwise gives
    ``(nan, "inconclusive")``.
    """
    radii, detour = list(profile.radii), list(profile.detour)
    if any(d == UNREACHABLE for d in detour[1:]):
        return INFINITY, INFINITE
    pts = [(r, d) for r, d in zip(radii, detour) if d != UNREACHABLE and r > 0 and d > 0]
    if len(pts) < 4:
        return float("nan"), INCONCLUSIVE
    slope, _, _ = _loglog(*zip(*pts))
    return slope, classify_exponent(slope)


def divergence_profile(g: SpaceGraph, path: PathInSpace, radii, seed=None) -> DivergenceProfile:
    """Punctured detour between ``path(mid - r)`` and ``path(mid + r)`` for each radius.

    The ball is centered at the path vertex nearest the arclength midpoint.
    Endpoints are snapped to path vertices, so the removed ball uses the
    effective radius ``min(r, d(u, c), d(v, c))`` which keeps both endpoints
    admissible.  ``seed`` is accepted for interface uniformity; the profile
    is deterministic.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or sorted(set(radii)) != radii:
        raise InputError("radii must be increasing and positive")
    mid = path.length / 2
    if radii[-1] > mid - 2 * g.scale_h:
        raise InputError(f"radius {radii[-1]:g} exceeds the built region "
                         f"(limit {mid - 2 * g.scale_h:g})")
    c = point_at_arclength(path, mid)
    dc = g.distances_from(c)
    detour, eff = [], []
    for r in radii:
        u, v = point_at_arclength(path, mid - r), point_at_arclength(path, mid + r)
        r_eff = min(r, float(dc[u]), float(dc[v]))
        eff.append(r_eff)
        detour.append(punctured_distance(g, u, v, c, r_eff))
    prof = DivergenceProfile(radii=radii, detour=detour, effective_radii=eff, center=int(c))
    prof.fit_exponent, prof.growth_class = fit_growth(prof)
    finite = [(r, d) for r, d in zip(radii, detour) if d != UNREACHABLE]
    if prof.growth_class not in (INFINITE, INCONCLUSIVE):
        prof.fit_quality = _loglog(*zip(*finite))[2]
    return prof
