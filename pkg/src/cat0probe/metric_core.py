"""Graph-based metric kernel.

A :class:`SpaceGraph` is a connected, undirected, positively weighted graph
that stands in for a geodesic metric space; vertex identifiers are the
integers ``0 .. n-1``.  Distances are exact graph distances computed with
Dijkstra's algorithm (``scipy.sparse.csgraph``), so the metric axioms hold
up to floating point summation order.

Paths are :class:`PathInSpace` walks parameterized by arclength.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from cat0probe import _kernels
from cat0probe.errors import InputError, PreconditionError

UNREACHABLE = math.inf
"""Returned by punctured distances when no admissible walk exists."""

# relative slack used whenever two floating point path lengths are compared
REL_TOL = 1e-9


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a sequence of ints or a ``SeedSequence``.

    A given ``SeedSequence`` is copied with a fresh spawn counter, so passing
    the same object twice yields the same streams.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def _tol(x: float) -> float:
    return REL_TOL * max(1.0, abs(x))


class SpaceGraph:
    """Immutable weighted graph approximating a geodesic metric space.

    Parameters
    ----------
    n_vertices : int
        Vertices are ``0 .. n_vertices-1``.
    edge_a, edge_b, edge_len : array_like
        Undirected edges.  Duplicates are merged keeping the shortest length.
    scale_h : float
        Discretization pitch of the approximation.
    family_tag : str
        Name of the generating space.
    coords : array_like, optional
        ``(n, 2)`` embedding coordinates; rows may be NaN for vertices
        without a chart.
    """

    _CACHE_SIZE = 24

    def __init__(self, n_vertices, edge_a, edge_b, edge_len, scale_h, family_tag,
                 coords=None, check_connected=True):
        n = int(n_vertices)
        if n < 1:
            raise InputError("a SpaceGraph needs at least one vertex")
        if not scale_h > 0:
            raise InputError(f"scale_h must be positive, got {scale_h}")
        a = np.asarray(edge_a, dtype=np.int64)
        b = np.asarray(edge_b, dtype=np.int64)
        w = np.asarray(edge_len, dtype=np.float64)
        if not (a.shape == b.shape == w.shape):
            raise InputError("edge arrays must have equal length")
        if a.size and (a.min() < 0 or b.min() < 0 or a.max() >= n or b.max() >= n):
            raise InputError("edge endpoint out of range")
        if np.any(a == b):
            raise InputError("self loops are not allowed")
        if a.size and not np.all(np.isfinite(w) & (w > 0)):
            raise InputError("every edge length must be finite and > 0")

        lo, hi = np.minimum(a, b), np.maximum(a, b)
        order = np.lexsort((w, hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if lo.size:
            first = np.ones(lo.size, dtype=bool)
            first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
            lo, hi, w = lo[first], hi[first], w[first]

        csr = sp.csr_matrix(
            (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
            shape=(n, n),
        )
        csr.sort_indices()
        if check_connected and n > 1:
            ncomp, _ = connected_components(csr, directed=False)
            if ncomp != 1:
                raise InputError(f"graph has {ncomp} connected components")

        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.shape != (n, 2):
                raise InputError("coords must have shape (n, 2)")
            coords.setflags(write=False)

        for arr in (lo, hi, w, csr.data, csr.indices, csr.indptr):
            arr.setflags(write=False)
        self.n_vertices = n
        self.edge_a = lo
        self.edge_b = hi
        self.edge_len = w
        self.scale_h = float(scale_h)
        self.family_tag = str(family_tag)
        self.coords = coords
        self.csr = csr
        self._cache: OrderedDict = OrderedDict()

    def __repr__(self):
        return (f"SpaceGraph(family_tag={self.family_tag!r}, n_vertices={self.n_vertices}, "
                f"n_edges={self.n_edges}, scale_h={self.scale_h})")

    @property
    def n_edges(self) -> int:
        return int(self.edge_a.size)

    def check_vertex(self, v) -> int:
        try:
            iv = int(v)
        except (TypeError, ValueError):
            raise InputError(f"unknown vertex {v!r}") from None
        if iv != v or not 0 <= iv < self.n_vertices:
            raise InputError(f"unknown vertex {v!r}")
        return iv

    def neighbors(self, v):
        """Return ``(neighbor_ids, edge_lengths)`` sorted by neighbor id."""
        lo, hi = self.csr.indptr[v], self.csr.indptr[v + 1]
        return self.csr.indices[lo:hi], self.csr.data[lo:hi]

    def edge_length(self, u, v) -> float:
        nbrs, lens = self.neighbors(u)
        k = np.searchsorted(nbrs, v)
        if k >= nbrs.size or nbrs[k] != v:
            raise InputError(f"vertices {u} and {v} are not adjacent")
        return float(lens[k])

    def distances_from(self, source: int, limit: float = np.inf) -> np.ndarray:
        """Single-source distances; unreached vertices (beyond ``limit``) are inf.

        Unlimited results are memoized, so callers must not mutate them.
        """
        source = self.check_vertex(source)
        if limit == np.inf:
            hit = self._cache.get(source)
            if hit is not None:
                self._cache.move_to_end(source)
                return hit
        d = dijkstra(self.csr, directed=True, indices=source, limit=limit)
        if limit == np.inf:
            d.setflags(write=False)
            self._cache[source] = d
            if len(self._cache) > self._CACHE_SIZE:
                self._cache.popitem(last=False)
        return d

    def ball(self, source: int, radius: float):
        """Vertices at distance strictly less than ``radius`` and their distances.

        Only the ball is explored, so this is cheap for small radii.
        """
        source = self.check_vertex(source)
        scratch = np.full(self.n_vertices, np.inf)
        return _kernels.ball_dijkstra(self.csr.indptr, self.csr.indices, self.csr.data,
                                      source, float(radius), scratch)

    def distances_from_set(self, sources, limit: float = np.inf) -> np.ndarray:
        """Distance from every vertex to the nearest vertex of ``sources``."""
        src = np.unique(np.asarray(sources, dtype=np.int64))
        return dijkstra(self.csr, directed=True, indices=src, limit=limit, min_only=True)

    def distance_rows(self, sources, limit: float = np.inf) -> np.ndarray:
        """Matrix of distances, one row per entry of ``sources``."""
        src = np.asarray(sources, dtype=np.int64)
        return np.atleast_2d(dijkstra(self.csr, directed=True, indices=src, limit=limit))

    # serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        vertices = []
        for v in range(self.n_vertices):
            rec = {"id": v}
            if self.coords is not None and not np.isnan(self.coords[v, 0]):
                rec["x"] = float(self.coords[v, 0])
                rec["y"] = float(self.coords[v, 1])
            vertices.append(rec)
        edges = [{"a": int(a), "b": int(b), "len": float(w)}
                 for a, b, w in zip(self.edge_a, self.edge_b, self.edge_len)]
        return {"family_tag": self.family_tag, "scale_h": self.scale_h,
                "vertices": vertices, "edges": edges}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SpaceGraph":
        try:
            verts = doc["vertices"]
            ids = [int(v["id"]) for v in verts]
            if sorted(ids) != list(range(len(ids))):
                raise InputError("vertex ids must be 0..n-1")
            coords = None
            if any("x" in v for v in verts):
                coords = np.full((len(ids), 2), np.nan)
                for v in verts:
                    if "x" in v:
                        coords[int(v["id"])] = (v["x"], v["y"])
            edges = doc["edges"]
            a = [e["a"] for e in edges]
            b = [e["b"] for e in edges]
            w = [e["len"] for e in edges]
            return cls(len(ids), a, b, w, doc["scale_h"], doc["family_tag"], coords=coords)
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed SpaceGraph document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SpaceGraph":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class PathInSpace:
    """Vertex walk with its cumulative arclength (``cum_len[0] == 0``)."""

    vertices: np.ndarray
    cum_len: np.ndarray

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.cum_len.setflags(write=False)

    def __len__(self):
        return int(self.vertices.size)

    @property
    def length(self) -> float:
        return float(self.cum_len[-1])

    @classmethod
    def from_vertices(cls, g: SpaceGraph, seq) -> "PathInSpace":
        verts = np.asarray([g.check_vertex(v) for v in seq], dtype=np.int64)
        if verts.size == 0:
            raise InputError("a path needs at least one vertex")
        steps = np.empty(verts.size - 1)
        for i in range(verts.size - 1):
            steps[i] = g.edge_length(verts[i], verts[i + 1])
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        return cls(verts, cum)

    def reversed(self) -> "PathInSpace":
        return PathInSpace(self.vertices[::-1].copy(), self.length - self.cum_len[::-1])

    def subpath(self, i: int, j: int) -> "PathInSpace":
        """Vertices ``i..j`` inclusive (positions, not ids)."""
        return PathInSpace(self.vertices[i:j + 1].copy(), self.cum_len[i:j + 1] - self.cum_len[i])

    def to_json_dict(self, graph_ref: str = "") -> dict:
        return {"graph_ref": graph_ref, "vertex_ids": [int(v) for v in self.vertices]}

    @classmethod
    def from_json_dict(cls, g: SpaceGraph, doc: dict) -> "PathInSpace":
        try:
            return cls.from_vertices(g, doc["vertex_ids"])
        except KeyError as exc:
            raise InputError("path document needs 'vertex_ids'") from exc


def concat_paths(*paths: PathInSpace) -> PathInSpace:
    """Join paths whose consecutive endpoints coincide."""
    verts = [paths[0].vertices]
    cums = [paths[0].cum_len]
    offset = paths[0].length
    for p in paths[1:]:
        if p.vertices[0] != verts[-1][-1]:
            raise InputError("paths do not share an endpoint")
        verts.append(p.vertices[1:])
        cums.append(p.cum_len[1:] + offset)
        offset += p.length
    return PathInSpace(np.concatenate(verts), np.concatenate(cums))


@dataclass(frozen=True)
class QuasiGeodesicConstants:
    K: float
    L: float

    def __post_init__(self):
        if not (self.K >= 1 and self.L >= 0):
            raise InputError(f"need K >= 1 and L >= 0, got K={self.K}, L={self.L}")


@dataclass(frozen=True)
class QuasiWitness:
    """Outcome of a quasi-geodesic check.

    ``worst_pair`` is ``(s, t, lower, distance, upper)`` for the sampled pair
    with the smallest margin; ``margin`` is that margin (negative on failure).
    """

    holds: bool
    worst_pair: tuple
    margin: float
    samples_used: int


# distances and paths ---------------------------------------------------

def shortest_distance(g: SpaceGraph, u, v) -> float:
    u, v = g.check_vertex(u), g.check_vertex(v)
    if u == v:
        return 0.0
    # fixed source keeps the float sum order, hence the value, symmetric
    a, b = min(u, v), max(u, v)
    return float(g.distances_from(a)[b])


def _greedy_path(g: SpaceGraph, u: int, v: int, to_v: np.ndarray) -> PathInSpace:
    # walk down the shortest-path DAG towards v, always taking the smallest id
    verts = [u]
    cum = [0.0]
    w = u
    while w != v:
        nbrs, lens = g.neighbors(w)
        ok = to_v[nbrs] + lens <= to_v[w] + _tol(to_v[w])
        k = int(np.argmax(ok))
        if not ok[k]:
            raise RuntimeError("shortest-path DAG is broken; distances are inconsistent")
        verts.append(int(nbrs[k]))
        cum.append(cum[-1] + float(lens[k]))
        w = int(nbrs[k])
    return PathInSpace(np.asarray(verts, dtype=np.int64), np.asarray(cum))


def shortest_path(g: SpaceGraph, u, v) -> PathInSpace:
    """Lexicographically smallest vertex sequence among all shortest walks."""
    u, v = g.check_vertex(u), g.check_vertex(v)
    return _greedy_path(g, u, v, g.distances_from(v))


def _punctured_distances(g: SpaceGraph, v: int, keep: np.ndarray) -> np.ndarray:
    """Distances to ``v`` inside the subgraph induced on ``keep``."""
    if keep.all():
        return g.distances_from(v)
    idx = np.flatnonzero(keep)
    sub = g.csr[idx][:, idx]
    local = np.full(g.n_vertices, -1, dtype=np.int64)
    local[idx] = np.arange(idx.size)
    dsub = dijkstra(sub, directed=True, indices=int(local[v]))
    out = np.full(g.n_vertices, np.inf)
    out[idx] = dsub
    return out


def _admissible(g: SpaceGraph, u: int, v: int, center: int, radius: float):
    if radius < 0:
        raise InputError("radius must be nonnegative")
    dc = g.distances_from(center)
    keep = dc >= radius - _tol(radius)
    for name, x in (("u", u), ("v", v)):
        if not keep[x]:
            raise PreconditionError(
                f"endpoint {name}={x} lies inside the ball: d={dc[x]:.6g} < radius={radius:.6g}")
    return keep


def punctured_distance(g: SpaceGraph, u, v, center, radius: float) -> float:
    """Shortest walk from ``u`` to ``v`` avoiding the open ball ``B(center, radius)``.

    Vertices at distance exactly ``radius`` are kept.  Returns
    :data:`UNREACHABLE` when the puncture disconnects ``u`` from ``v``.
    """
    u, v, center = g.check_vertex(u), g.check_vertex(v), g.check_vertex(center)
    keep = _admissible(g, u, v, center, radius)
    return float(_punctured_distances(g, v, keep)[u])


def punctured_path(g: SpaceGraph, u, v, center, radius: float):
    """Like :func:`punctured_distance` but returns the walk, or None."""
    u, v, center = g.check_vertex(u), g.check_vertex(v), g.check_vertex(center)
    keep = _admissible(g, u, v, center, radius)
    to_v = _punctured_distances(g, v, keep)
    if not np.isfinite(to_v[u]):
        return None
    # removed vertices sit at infinity, so the greedy walk never enters them
    return _greedy_path(g, u, v, to_v)


def path_length(p: PathInSpace) -> float:
    return p.length


def point_at_arclength(p: PathInSpace, s: float) -> int:
    """Path vertex whose arclength is nearest to ``s`` (earlier one on ties)."""
    return int(p.vertices[_position_at(p, s)])


def _position_at(p: PathInSpace, s) -> np.ndarray | int:
    s_arr = np.asarray(s, dtype=np.float64)
    L = p.length
    if np.any(s_arr < -_tol(L)) or np.any(s_arr > L + _tol(L)):
        raise InputError(f"arclength parameter outside [0, {L}]")
    cum = p.cum_len
    hi = np.clip(np.searchsorted(cum, s_arr, side="left"), 0, cum.size - 1)
    lo = np.clip(hi - 1, 0, cum.size - 1)
    pick = np.where(np.abs(cum[lo] - s_arr) <= np.abs(cum[hi] - s_arr), lo, hi)
    return int(pick) if pick.ndim == 0 else pick


def hausdorff_distance(g: SpaceGraph, p1: PathInSpace, p2: PathInSpace) -> float:
    d_to_2 = g.distances_from_set(p2.vertices)
    d_to_1 = g.distances_from_set(p1.vertices)
    return float(max(d_to_2[p1.vertices].max(), d_to_1[p2.vertices].max()))


def is_geodesic(g: SpaceGraph, p: PathInSpace) -> bool:
    d = shortest_distance(g, p.vertices[0], p.vertices[-1])
    return p.length <= d + _tol(d)


# projection ------------------------------------------------------------

def project_onto_path(g: SpaceGraph, p: PathInSpace):
    """Nearest-point projection of every vertex onto the vertex set of ``p``.

    Returns ``(dist, pos)`` where ``dist[w]`` is the distance from ``w`` to the
    path and ``pos[w]`` the smallest path position realizing it.
    """
    dist = g.distances_from_set(p.vertices)
    first_pos = np.full(g.n_vertices, -1, dtype=np.int64)
    # first occurrence wins when the walk revisits a vertex
    first_pos[p.vertices[::-1]] = np.arange(len(p) - 1, -1, -1)
    order = np.argsort(dist, kind="stable")
    pos = _kernels.propagate_labels(g.csr.indptr, g.csr.indices, g.csr.data,
                                    dist, order, first_pos, REL_TOL)
    return dist, pos


# quasi-geodesics -------------------------------------------------------

def _quasi_sample(p: PathInSpace, sample_pairs: int, seed):
    if sample_pairs < 1:
        raise InputError("sample_pairs must be >= 1")
    L = p.length
    m = max(2, math.ceil(math.sqrt(sample_pairs)))
    grid = np.linspace(0.0, L, m)
    gi, gj = np.triu_indices(m, k=1)
    rng = np.random.default_rng(seed)
    rand = rng.uniform(0.0, L, size=(sample_pairs, 2))
    s = np.concatenate([grid[gi], rand[:, 0]])
    t = np.concatenate([grid[gj], rand[:, 1]])
    return s, t


def _pair_distances(g: SpaceGraph, p: PathInSpace, s, t):
    """Distances between the vertices nearest to parameters ``s`` and ``t``.

    Also returns the arclength parameters of those vertices, which is where
    the inequality is evaluated.
    """
    ps, pt = _position_at(p, s), _position_at(p, t)
    vs, vt = p.vertices[ps], p.vertices[pt]
    uniq, inv = np.unique(vs, return_inverse=True)
    walk = np.abs(p.cum_len[ps] - p.cum_len[pt])
    limit = float(walk.max()) * (1 + 1e-6) + 1e-9 if walk.size else 0.0
    rows = g.distance_rows(uniq, limit=limit)
    return rows[inv, vt], p.cum_len[ps], p.cum_len[pt]


def _margins(s, t, d, K, L):
    gap = np.abs(s - t)
    lower = gap / K - L
    upper = K * gap + L
    return lower, upper, np.minimum(d - lower, upper - d)


def _lower_bound_distances(g: SpaceGraph, p: PathInSpace, s, t, K: float, L: float):
    """Pair distances, exact wherever the lower inequality could bind.

    From each source vertex only the ball reaching the largest required
    lower bound is explored; pairs left unresolved get ``inf`` and provably
    satisfy both inequalities.
    """
    ps, pt = _position_at(p, s), _position_at(p, t)
    vs, vt = p.vertices[ps], p.vertices[pt]
    s, t = p.cum_len[ps], p.cum_len[pt]
    lower = np.abs(s - t) / K - L
    d = np.full(s.size, np.inf)
    scratch = np.full(g.n_vertices, np.inf)
    order = np.argsort(vs, kind="stable")
    bounds = np.flatnonzero(np.diff(vs[order])) + 1
    for grp in np.split(order, bounds):
        if grp.size == 0:
            continue
        reach = max(float(lower[grp].max()), 0.0)
        radius = reach + _tol(reach) + 1e-12
        verts, dists = _kernels.ball_dijkstra(g.csr.indptr, g.csr.indices, g.csr.data,
                                              int(vs[grp[0]]), radius, scratch)
        scratch[verts] = dists
        d[grp] = scratch[vt[grp]]
        scratch[verts] = np.inf
    return d, s, t


def verify_quasi_geodesic(g: SpaceGraph, p: PathInSpace, k: QuasiGeodesicConstants,
                          sample_pairs: int, seed, exact_margin: bool = True) -> QuasiWitness:
    """Check the two-sided quasi-isometric inequality on sampled parameter pairs.

    Pairs are every pair of a uniform grid of ``ceil(sqrt(sample_pairs))``
    parameters plus ``sample_pairs`` seeded random pairs.  Each parameter is
    snapped to its nearest path vertex and the inequality is evaluated at
    that vertex's arclength, so long edges cannot fake a violation.

    With ``exact_margin=False`` distances are only resolved where the lower
    inequality could bind, which is much cheaper on large graphs.  ``holds``
    is unaffected; ``margin`` and ``worst_pair`` then range over the
    resolved pairs only (the others are certified to satisfy both sides).
    """
    s, t = _quasi_sample(p, sample_pairs, seed)
    if exact_margin:
        d, s, t = _pair_distances(g, p, s, t)
    else:
        d, s, t = _lower_bound_distances(g, p, s, t, k.K, k.L)
    lower, upper, margin = _margins(s, t, d, k.K, k.L)
    margin = np.where(np.isfinite(d), margin, np.inf)
    i = int(np.argmin(margin))
    worst = (float(s[i]), float(t[i]), float(lower[i]), float(d[i]), float(upper[i]))
    m = float(margin[i])
    return QuasiWitness(holds=m >= -_tol(upper[i]), worst_pair=worst, margin=m,
                        samples_used=int(s.size))


def tightest_quasi_constants(g: SpaceGraph, p: PathInSpace, samples: int, seed) -> QuasiGeodesicConstants:
    """Smallest K on the sample set of :func:`verify_quasi_geodesic`, with L = 2h."""
    L = 2.0 * g.scale_h
    s, t = _quasi_sample(p, samples, seed)
    d, s, t = _pair_distances(g, p, s, t)
    gap = np.abs(s - t)
    K = 1.0
    if gap.size:
        with np.errstate(divide="ignore", invalid="ignore"):
            k_lower = np.where(gap > 0, gap / (d + L), 0.0)
            k_upper = np.where(gap > 0, (d - L) / gap, 0.0)
        K = max(1.0, float(np.max(k_lower)), float(np.max(k_upper)))
    # nudge up so the same samples pass despite rounding in the ratios
    return QuasiGeodesicConstants(K=K if K == 1.0 else K * (1 + 1e-12), L=L)
