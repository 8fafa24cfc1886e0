"""Executable detour dissection: two detour points with close projections and a short bypass."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from cat0probe.errors import InputError
from cat0probe.metric_core import (
    PathInSpace,
    SpaceGraph,
    _tol,
    concat_paths,
    point_at_arclength,
    project_onto_path,
    shortest_path,
)

# slack factor on the 7 c_r shortcut length
SHORTCUT_SLACK = 1.05


@dataclass
class Lemma31Witness:
    r: float
    epsilon_r: float
    c_r: float
    pair_index: int
    pair_gap: float
    shortcut_len: float
    shortcut_clearance: float
    gap_bound: float
    shortcut_bound: float
    first_hits: list = field(default_factory=list)
    x: tuple = ()
    y: tuple = ()
    shortcut: list = field(default_factory=list)

    @property
    def invariants_hold(self) -> bool:
        c_ok = self.c_r == min(self.epsilon_r ** (-1.0 / 3.0), self.r / 4.0)
        return c_ok and self.pair_gap <= self.gap_bound and self.shortcut_len <= self.shortcut_bound

    def to_dict(self) -> dict:
        d = asdict(self)
        d["invariants_hold"] = self.invariants_hold
        return d


def window_first_hits(proj_s: np.ndarray, centers: np.ndarray, width: float) -> np.ndarray:
    """Index of the first detour vertex whose projection lies in each window (-1 if none)."""
    half = width / 2.0
    inside = np.abs(proj_s[None, :] - centers[:, None]) <= half + _tol(half)
    hit = inside.any(axis=1)
    return np.where(hit, inside.argmax(axis=1), -1)


def lemma31_dissect(g: SpaceGraph, path: PathInSpace, detour: PathInSpace, r: float) -> Lemma31Witness:
    """Run the detour dissection on ``detour`` around the ball of radius ``r`` at the path midpoint.

    ``epsilon_r = |detour| / r^2`` and ``c_r = min(epsilon_r^(-1/3), r/4)``.
    Windows of width ``c_r`` centered at arclength ``mid - r/2 + n c_r``
    (``n = 0 .. floor(r / c_r)``) are hit in order along the detour; the
    consecutive pair of first hits closest along the detour is ``x^1, x^2``
    with projections ``y^1, y^2``.  The shortcut joins ``y^1`` to the point
    at distance ``2 c_r`` along the geodesic ``rho^1 = [y^1, x^1]``, then to
    the point at the same relative parameter on ``rho^2 = [y^2, x^2]``, then
    to ``y^2``.  Clearance is the distance from the middle leg to the path
    segment between ``y^1`` and ``y^2``.
    """
    if not r > 0:
        raise InputError("r must be positive")
    mid = path.length / 2
    if r > mid:
        raise InputError(f"r={r:g} exceeds half the path length")
    u, v = point_at_arclength(path, mid - r), point_at_arclength(path, mid + r)
    ends = {int(detour.vertices[0]), int(detour.vertices[-1])}
    if ends != {u, v}:
        raise InputError("detour must join the path points at arclength mid - r and mid + r")
    if not detour.length < r * r / 16:
        raise InputError(f"detour length {detour.length:g} is not below r^2/16 = {r * r / 16:g}")
    center = point_at_arclength(path, mid)
    dc = g.distances_from(center)
    r_eff = min(r, float(dc[u]), float(dc[v]))
    if float(dc[detour.vertices].min()) < r_eff - _tol(r_eff):
        raise InputError("detour enters the ball it should avoid")

    eps = detour.length / (r * r)
    c = min(eps ** (-1.0 / 3.0), r / 4.0)
    n_max = math.floor(r / c)
    centers = mid - r / 2 + c * np.arange(n_max + 1)

    _, pos = project_onto_path(g, path)
    proj_s = path.cum_len[pos[detour.vertices]]
    hits = window_first_hits(proj_s, centers, c)
    if np.any(hits < 0):
        raise InputError(f"detour misses projection window {int(np.argmax(hits < 0))}; "
                         "it does not span the windows")
    gaps = np.abs(np.diff(detour.cum_len[hits]))
    m = int(np.argmin(gaps))
    x1, x2 = int(detour.vertices[hits[m]]), int(detour.vertices[hits[m + 1]])
    i1, i2 = int(pos[x1]), int(pos[x2])
    y1, y2 = int(path.vertices[i1]), int(path.vertices[i2])

    rho1, rho2 = shortest_path(g, y1, x1), shortest_path(g, y2, x2)
    t = min(1.0, 2.0 * c / rho1.length) if rho1.length > 0 else 0.0
    p1 = point_at_arclength(rho1, t * rho1.length)
    p2 = point_at_arclength(rho2, t * rho2.length)
    middle = shortest_path(g, p1, p2)
    sigma = concat_paths(shortest_path(g, y1, p1), middle, shortest_path(g, p2, y2))
    lo, hi = sorted((i1, i2))
    seg = path.vertices[lo:hi + 1]
    clearance = float(g.distances_from_set(seg)[middle.vertices].min())

    return Lemma31Witness(
        r=float(r), epsilon_r=eps, c_r=c, pair_index=m, pair_gap=float(gaps[m]),
        shortcut_len=sigma.length, shortcut_clearance=clearance,
        gap_bound=4.0 * eps * c * r / 3.0 + g.scale_h,
        shortcut_bound=7.0 * c * SHORTCUT_SLACK,
        first_hits=[int(h) for h in hits], x=(x1, x2), y=(y1, y2),
        shortcut=[int(w) for w in sigma.vertices],
    )
