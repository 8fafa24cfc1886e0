"""Sampled CAT(0) validity checks and nearest-point projection.

Each check returns a :class:`CheckReport` whose ``worst_violation`` is the
largest observed excess over the CAT(0) prediction; the check passes when
that excess is at most ``tolerance_used``.  Discretization error is the only
legitimate slack, so tolerances are multiples of ``scale_h`` (see
:func:`tolerance_profile`).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from cat0probe.errors import InputError, PreconditionError
from cat0probe.metric_core import (
    seed_sequence,
    PathInSpace,
    SpaceGraph,
    _tol,
    is_geodesic,
    point_at_arclength,
    project_onto_path,
    shortest_distance,
    shortest_path,
)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

UNIQUENESS_PATH_CAP = 10_000


@dataclass
class CheckReport:
    name: str
    samples: int
    worst_violation: float
    worst_witness: dict
    tolerance_used: float
    skipped: int = 0
    inconclusive: bool = False

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tolerance_used

    @property
    def verdict(self) -> str:
        if not self.passed:
            return FAIL
        return INCONCLUSIVE if self.inconclusive else PASS

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d


def _report(name, samples, worst, witness, tol, **kw) -> CheckReport:
    return CheckReport(name, int(samples), float(worst), witness or {}, float(tol), **kw)


# negative control ------------------------------------------------------

def build_cycle(n: int = 40) -> SpaceGraph:
    """Unit-edge cycle graph; positively curved at large scale, so not CAT(0)."""
    if n < 3:
        raise InputError("cycle needs at least 3 vertices")
    a = np.arange(n)
    return SpaceGraph(n, a, (a + 1) % n, np.ones(n), 1.0, f"cycle_{n}")


# comparison triangles --------------------------------------------------

def comparison_point(a: float, b: float, c: float, s: float) -> float:
    """Distance in the Euclidean comparison triangle from the apex to a base point.

    The base has length ``a``, the apex is at distance ``c`` from the base's
    start and ``b`` from its end; the base point sits at arclength ``s``.
    """
    x = (c * c + a * a - b * b) / (2.0 * a)
    y2 = max(c * c - x * x, 0.0)
    return math.hypot(x - s, math.sqrt(y2))


def _local_sample(g: SpaceGraph, rng, k: int, max_extent):
    """``k`` distinct vertices: a uniform anchor plus ``k-1`` within ``max_extent`` of it."""
    anchor = int(rng.integers(g.n_vertices))
    if max_extent is None:
        pool = np.delete(np.arange(g.n_vertices), anchor)
    else:
        d = g.distances_from(anchor, limit=max_extent * (1 + 1e-9))
        pool = np.flatnonzero((d > 0) & (d <= max_extent))
        if pool.size < k - 1:
            pool = np.delete(np.arange(g.n_vertices), anchor)
    rest = rng.choice(pool, size=k - 1, replace=False)
    return [anchor] + [int(x) for x in rest]


def comparison_triangle_check(g: SpaceGraph, triangle_samples: int, interior_samples: int,
                              tol: float, seed, max_extent: float | None = None,
                              degenerate_tol: float | None = None) -> CheckReport:
    """Sampled CAT(0) inequality against Euclidean comparison triangles.

    With ``max_extent`` set, the apex ``p`` is uniform and ``q, r`` are drawn
    within ``max_extent`` of it.  Triples whose triangle inequality is tight
    to within ``degenerate_tol`` (default ``1e-9 * scale_h``) are skipped.
    """
    if degenerate_tol is None:
        degenerate_tol = 1e-9 * g.scale_h
    if triangle_samples < 1 or interior_samples < 1:
        raise InputError("sample counts must be >= 1")
    rng = np.random.default_rng(seed)
    worst, witness, used, skipped = -math.inf, None, 0, 0
    fracs = np.arange(1, interior_samples + 1) / (interior_samples + 1)
    for _ in range(triangle_samples):
        p, q, r = _local_sample(g, rng, 3, max_extent)
        dp = g.distances_from(p)
        a = shortest_distance(g, q, r)
        b, c = float(dp[r]), float(dp[q])
        if min(b + c - a, a + c - b, a + b - c) <= degenerate_tol:
            skipped += 1
            continue
        used += 1
        base = shortest_path(g, q, r)
        for f in fracs:
            s = f * base.length
            pos = int(np.searchsorted(base.cum_len, s))
            pos = min(pos, len(base) - 1)
            if pos > 0 and abs(base.cum_len[pos - 1] - s) <= abs(base.cum_len[pos] - s):
                pos -= 1
            m = int(base.vertices[pos])
            sm = float(base.cum_len[pos])
            bar = comparison_point(a, b, c, sm)
            excess = float(dp[m]) - bar
            if excess > worst:
                worst = excess
                witness = {"p": p, "q": q, "r": r, "m": m, "arclength": sm,
                           "d_pm": float(dp[m]), "comparison": bar}
    if used == 0:
        worst = -math.inf
    return _report("comparison_triangle", used, worst, witness, tol, skipped=skipped,
                   inconclusive=used == 0)


# convexity -------------------------------------------------------------

def convexity_check(g: SpaceGraph, path1: PathInSpace, path2: PathInSpace, t_samples: int,
                    tol: float) -> CheckReport:
    """Convexity of the distance between two geodesics parameterized proportionally."""
    for name, p in (("path1", path1), ("path2", path2)):
        if not is_geodesic(g, p):
            raise PreconditionError(f"{name} is not a shortest path")
    if t_samples < 2:
        raise InputError("t_samples must be >= 2")
    ts = np.linspace(0.0, 1.0, t_samples)
    c1 = np.array([point_at_arclength(path1, t * path1.length) for t in ts])
    c2 = np.array([point_at_arclength(path2, t * path2.length) for t in ts])
    uniq, inv = np.unique(c1, return_inverse=True)
    rows = g.distance_rows(uniq)
    psi = rows[inv, c2]
    bound = (1 - ts) * psi[0] + ts * psi[-1]
    excess = psi - bound
    i = int(np.argmax(excess))
    witness = {"t": float(ts[i]), "psi": float(psi[i]), "bound": float(bound[i]),
               "c1": int(c1[i]), "c2": int(c2[i])}
    return _report("convexity", t_samples, excess[i], witness, tol)


def convexity_sample_check(g: SpaceGraph, geodesic_samples: int, t_samples: int, tol: float,
                           seed, max_extent: float | None = None) -> CheckReport:
    """:func:`convexity_check` over random geodesic pairs; every other pair shares its start."""
    rng = np.random.default_rng(seed)
    worst = None
    for k in range(geodesic_samples):
        a, b, c, d = _local_sample(g, rng, 4, max_extent)
        if k % 2:
            c = a
        rep = convexity_check(g, shortest_path(g, a, b), shortest_path(g, c, d), t_samples, tol)
        if worst is None or rep.worst_violation > worst.worst_violation:
            worst = rep
            worst.worst_witness = {**rep.worst_witness, "ends": [a, b, c, d]}
    return _report("convexity", geodesic_samples, worst.worst_violation, worst.worst_witness, tol)


# projection ------------------------------------------------------------

def nearest_point_projection(g: SpaceGraph, x, p: PathInSpace):
    """Return ``(vertex, distance)``: the path vertex closest to ``x``.

    Ties go to the smallest arclength parameter.
    """
    x = g.check_vertex(x)
    d = g.distances_from(x)[p.vertices]
    best = float(d.min())
    pos = int(np.flatnonzero(d <= best + _tol(best))[0])
    return int(p.vertices[pos]), float(d[pos])


def projection_nonexpansive_check(g: SpaceGraph, p: PathInSpace, pair_samples: int, tol: float,
                                  seed, local_radius: float | None = None) -> CheckReport:
    """Sampled check that projection onto a geodesic does not increase distances.

    Half the pairs are uniform; the other half pick ``y`` near ``x`` (within
    ``local_radius``, default ``8 * scale_h``) where failures concentrate.
    """
    if not is_geodesic(g, p):
        raise PreconditionError("projection target must be a shortest path")
    if local_radius is None:
        local_radius = 8 * g.scale_h
    _, pos = project_onto_path(g, p)
    rng = np.random.default_rng(seed)
    worst, witness = -math.inf, None
    for k in range(pair_samples):
        x = int(rng.integers(g.n_vertices))
        dx = g.distances_from(x)
        if k % 2:
            near = np.flatnonzero((dx > 0) & (dx <= local_radius))
            y = int(rng.choice(near)) if near.size else int(rng.integers(g.n_vertices))
        else:
            y = int(rng.integers(g.n_vertices))
        d_proj = abs(float(p.cum_len[pos[x]] - p.cum_len[pos[y]]))
        excess = d_proj - float(dx[y])
        if excess > worst:
            worst = excess
            witness = {"x": x, "y": y, "pi_x": int(p.vertices[pos[x]]), "pi_y": int(p.vertices[pos[y]]),
                       "d_xy": float(dx[y]), "d_proj": d_proj}
    return _report("projection_nonexpansive", pair_samples, worst, witness, tol)


# approximate uniqueness of geodesics -----------------------------------

def _enumerate_near_geodesics(g, u, v, bound, to_v, path_cap, expand_cap):
    """Yield vertex lists of simple u->v walks of length <= bound (DFS with pruning)."""
    expansions = 0
    stack = [(u, 0.0, [u], {u})]
    found = 0
    while stack:
        w, length, verts, seen = stack.pop()
        if w == v:
            found += 1
            if found > path_cap:
                raise OverflowError
            yield verts
            continue
        expansions += 1
        if expansions > expand_cap:
            raise OverflowError
        nbrs, lens = g.neighbors(w)
        for x, ell in zip(nbrs[::-1], lens[::-1]):
            x = int(x)
            if x in seen:
                continue
            total = length + float(ell)
            if total + to_v[x] <= bound:
                stack.append((x, total, verts + [x], seen | {x}))


def geodesic_uniqueness_check(g: SpaceGraph, pair_samples: int, slack: float, tube: float,
                              seed, tube_rel: float = 0.0, pairs=None,
                              path_cap: int = UNIQUENESS_PATH_CAP) -> CheckReport:
    """Near-geodesics between sampled pairs stay within a Hausdorff tube of the geodesic.

    The tube for a pair at distance ``d`` is ``tube + tube_rel * d``.  Pairs
    whose enumeration exceeds ``path_cap`` paths make the verdict
    inconclusive unless a violation was found elsewhere.
    """
    if slack < 0:
        raise InputError("slack must be >= 0")
    rng = np.random.default_rng(seed)
    if pairs is None:
        pairs = [tuple(int(x) for x in rng.choice(g.n_vertices, size=2, replace=False))
                 for _ in range(pair_samples)]
    worst, witness, capped = -math.inf, None, 0
    for u, v in pairs:
        to_v = g.distances_from(v)
        d = float(to_v[u])
        ref = shortest_path(g, u, v)
        to_ref = g.distances_from_set(ref.vertices)
        allowed = tube + tube_rel * d
        bound = (1 + slack) * d + _tol(d)
        try:
            for verts in _enumerate_near_geodesics(g, u, v, bound, to_v, path_cap, 50 * path_cap):
                one_side = float(to_ref[verts].max())
                if one_side <= allowed + _tol(allowed):
                    back = g.distances_from_set(verts, limit=allowed * (1 + 1e-9) + 1e-9)
                    other = float(back[ref.vertices].max())
                    if np.isinf(other):
                        other = float(g.distances_from_set(verts)[ref.vertices].max())
                    haus = max(one_side, other)
                else:
                    haus = max(one_side, float(g.distances_from_set(verts)[ref.vertices].max()))
                excess = haus - tube_rel * d
                if excess > worst:
                    worst = excess
                    witness = {"u": u, "v": v, "hausdorff": haus, "tube": allowed,
                               "path": [int(x) for x in verts]}
        except OverflowError:
            capped += 1
    rep = _report("geodesic_uniqueness", len(pairs), worst, witness, tube,
                  inconclusive=capped > 0)
    rep.skipped = capped
    return rep


# tolerance profiles ----------------------------------------------------

def tolerance_profile(family: str) -> dict:
    """Tolerance multipliers (units of ``scale_h``) calibrated for ``family``."""
    doc = json.loads(resources.files("cat0probe").joinpath("data/tolerance_profiles.json").read_text())
    profiles = doc["profiles"]
    if family not in profiles:
        raise InputError(f"no tolerance profile for family {family!r}")
    return dict(profiles[family])


def calibration_params() -> dict:
    """Zoo parameters and sample counts the tolerance profiles were calibrated at."""
    doc = json.loads(resources.files("cat0probe").joinpath("data/tolerance_profiles.json").read_text())
    return doc["calibration"]


# sampling radius of the triangle and convexity checks, in units of scale_h
DEFAULT_EXTENT = 24.0


def cat0_suite(g: SpaceGraph, path: PathInSpace, multipliers: dict, seed, samples: dict | None = None):
    """Run comparison, convexity and projection checks; returns a list of reports.

    ``multipliers`` maps ``comparison``, ``convexity``, ``projection`` (and
    optionally ``extent``) to multiples of ``scale_h``.
    """
    s = {"triangles": 40, "interior": 7, "geodesic_pairs": 30, "t_samples": 11, "projection_pairs": 200}
    s.update(samples or {})
    h = g.scale_h
    extent = multipliers.get("extent", DEFAULT_EXTENT) * h
    ss = seed_sequence(seed).spawn(3)
    return [
        comparison_triangle_check(g, s["triangles"], s["interior"], multipliers["comparison"] * h, ss[0],
                                  max_extent=extent),
        convexity_sample_check(g, s["geodesic_pairs"], s["t_samples"], multipliers["convexity"] * h, ss[1],
                               max_extent=extent),
        projection_nonexpansive_check(g, path, s["projection_pairs"], multipliers["projection"] * h, ss[2]),
    ]
