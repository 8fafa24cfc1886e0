"""Deterministic builders for the benchmark spaces.

Every builder returns a :class:`ZooEntry`: the graph, a designated base
geodesic running through the middle of the built region, and the
classification that geodesic is expected to receive.

Families
--------
euclidean_plane
    16-neighbor square grid with Euclidean edge lengths.
hyperbolic_plane
    Geodesic polar grid of the hyperbolic plane, edge lengths are exact
    hyperbolic distances.
regular_tree
    Rooted regular tree with unit edges.
plane_wedge
    Two Euclidean grids sharing their origin vertex.
strip_glued_hyperbolic
    Hyperbolic polar grid with a flat half-strip glued along a diameter.
tree_cross_line
    Product of a regular tree and a segment with an l2-type stencil.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cat0probe.errors import BudgetExceeded, InputError
from cat0probe.metric_core import PathInSpace, SpaceGraph, is_geodesic

DEFAULT_VERTEX_CAP = 2_000_000

# 16-neighbor stencil, one representative per undirected pair
STENCIL16 = ((1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1))

LINEAR = "linear"
SUPERLINEAR = "superlinear-subquadratic"
QUADRATIC = "at-least-quadratic"
INFINITE = "infinite"
DIVERGENCE_CLASSES = (LINEAR, SUPERLINEAR, QUADRATIC, INFINITE)


@dataclass(frozen=True)
class Expected:
    morse: bool
    contracting: bool
    divergence_class: str

    def to_dict(self):
        return {"morse": "yes" if self.morse else "no",
                "contracting": "yes" if self.contracting else "no",
                "divergence_class": self.divergence_class}


@dataclass(frozen=True, eq=False)
class ZooEntry:
    graph: SpaceGraph
    base_path: PathInSpace
    expected: Expected
    params: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return self.graph.family_tag


def _check_budget(n: int, cap: int) -> None:
    if n > cap:
        raise BudgetExceeded(f"builder needs {n} vertices, cap is {cap}")


def _entry(g, base_vertices, expected, params) -> ZooEntry:
    base = PathInSpace.from_vertices(g, base_vertices)
    if not is_geodesic(g, base):
        raise RuntimeError(f"{g.family_tag}: designated base path is not a shortest path")
    return ZooEntry(g, base, expected, dict(params))


def _grid_edges(ids: np.ndarray, h: float):
    """16-neighbor edges of a 2-D id array indexed ``ids[ix, iy]``."""
    nx, ny = ids.shape
    a, b, w = [], [], []
    for dx, dy in STENCIL16:
        x0, x1 = max(0, -dx), nx - max(0, dx)
        y0, y1 = max(0, -dy), ny - max(0, dy)
        if x0 >= x1 or y0 >= y1:
            continue
        a.append(ids[x0:x1, y0:y1].ravel())
        b.append(ids[x0 + dx:x1 + dx, y0 + dy:y1 + dy].ravel())
        w.append(np.full(a[-1].size, h * math.hypot(dx, dy)))
    return np.concatenate(a), np.concatenate(b), np.concatenate(w)


def _steps(extent: float, h: float, name: str) -> int:
    if not h > 0:
        raise InputError("h must be positive")
    k = int(round(extent / h))
    if abs(k * h - extent) > 1e-9 * max(1.0, extent):
        raise InputError(f"{name}={extent} is not a multiple of h={h}")
    return k


# Euclidean plane --------------------------------------------------------

def _plane_arrays(halfwidth: float, h: float):
    k = _steps(halfwidth, h, "halfwidth")
    side = 2 * k + 1
    ids = np.arange(side * side, dtype=np.int64).reshape(side, side)  # ids[ix, iy]
    xs = (np.arange(side) - k) * h
    coords = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    return k, ids, coords


def build_euclidean_plane(halfwidth: float, h: float = 1.0, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """16-neighbor grid on ``[-halfwidth, halfwidth]^2``; base path is the x-axis."""
    if halfwidth < 20 * h:
        raise InputError("euclidean_plane needs halfwidth >= 20h")
    k = _steps(halfwidth, h, "halfwidth")
    _check_budget((2 * k + 1) ** 2, vertex_cap)
    k, ids, coords = _plane_arrays(halfwidth, h)
    a, b, w = _grid_edges(ids, h)
    g = SpaceGraph(ids.size, a, b, w, h, "euclidean_plane", coords=coords)
    return _entry(g, ids[:, k], Expected(False, False, LINEAR),
                  {"halfwidth": halfwidth, "h": h})


def plane_vertex(entry: ZooEntry, x: float, y: float) -> int:
    """Vertex id of grid point ``(x, y)`` in a euclidean_plane entry."""
    h, hw = entry.params["h"], entry.params["halfwidth"]
    k = int(round(hw / h))
    ix, iy = int(round(x / h)) + k, int(round(y / h)) + k
    side = 2 * k + 1
    if not (0 <= ix < side and 0 <= iy < side):
        raise InputError(f"point ({x}, {y}) outside the grid")
    return ix * side + iy


# hyperbolic plane -------------------------------------------------------

def hyperbolic_distance(r1, t1, r2, t2):
    """Distance in geodesic polar coordinates, stable for nearby points."""
    s = np.sinh((np.asarray(r1) - r2) / 2.0) ** 2 + \
        np.sinh(r1) * np.sinh(r2) * np.sin((np.asarray(t1) - t2) / 2.0) ** 2
    return 2.0 * np.arcsinh(np.sqrt(s))


def model_distance(family: str, c1, c2):
    """Model-space distance between two chart coordinate pairs."""
    c1, c2 = np.asarray(c1, dtype=float), np.asarray(c2, dtype=float)
    if family in ("euclidean_plane", "plane_wedge"):
        return np.hypot(*(c1 - c2).T)
    if family in ("hyperbolic_plane", "strip_glued_hyperbolic"):
        r1, t1 = np.hypot(*c1.T), np.arctan2(c1.T[1], c1.T[0])
        r2, t2 = np.hypot(*c2.T), np.arctan2(c2.T[1], c2.T[0])
        return hyperbolic_distance(r1, t1, r2, t2)
    raise InputError(f"family {family!r} has no chart")


@dataclass(frozen=True)
class PolarLayout:
    """Ring structure of a hyperbolic polar grid."""

    h: float
    counts: np.ndarray   # vertices per ring, ring 0 is the center
    offsets: np.ndarray  # id of the first vertex of each ring

    @property
    def n_rings(self) -> int:
        return int(self.counts.size)

    @property
    def n_vertices(self) -> int:
        return int(self.offsets[-1] + self.counts[-1])

    def vertex(self, ring: int, index: int) -> int:
        return int(self.offsets[ring] + index % self.counts[ring])

    def axis_vertex(self, signed_ring: int) -> int:
        """Vertex on the theta=0 (positive) or theta=pi (negative) ray."""
        i = abs(signed_ring)
        if i == 0:
            return 0
        return self.vertex(i, 0 if signed_ring > 0 else self.counts[i] // 2)


def polar_layout(max_r: float, h: float) -> PolarLayout:
    m = _steps(max_r, h, "max_r")
    counts = [1]
    for i in range(1, m + 1):
        n = counts[-1] if i > 1 else 8
        # doubling keeps every inner angle present on all outer rings
        while 2 * math.pi * math.sinh(i * h) / n > h:
            n *= 2
        counts.append(n)
    counts = np.asarray(counts, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return PolarLayout(h, counts, offsets)


def _polar_edges(lay: PolarLayout, reach: float):
    h = lay.h
    a, b, w = [], [], []
    for i in range(lay.n_rings):
        for j in range(i, min(i + 2, lay.n_rings - 1) + 1):
            ri, rj = i * h, j * h
            ni, nj = int(lay.counts[i]), int(lay.counts[j])
            src = np.arange(ni)
            ti = 2 * math.pi * src / ni
            if i == 0:
                cand = np.tile(np.arange(nj), (1, 1))
                srcs = np.zeros_like(cand)
            else:
                num = math.sinh(reach / 2) ** 2 - math.sinh((rj - ri) / 2) ** 2
                if num <= 0:
                    continue
                ratio = num / (math.sinh(ri) * math.sinh(rj))
                dth = 2 * math.asin(min(1.0, math.sqrt(ratio)))
                half = int(math.ceil(dth * nj / (2 * math.pi))) + 1
                if 2 * half + 1 >= nj:
                    cand = np.tile(np.arange(nj), (ni, 1))
                else:
                    centre = np.rint(ti * nj / (2 * math.pi)).astype(np.int64)
                    cand = (centre[:, None] + np.arange(-half, half + 1)[None, :]) % nj
                srcs = np.broadcast_to(src[:, None], cand.shape)
            srcs, cand = srcs.ravel(), cand.ravel()
            d = hyperbolic_distance(ri, 2 * math.pi * srcs / ni, rj, 2 * math.pi * cand / nj)
            ok = d <= reach * (1 + 1e-12)
            va = lay.offsets[i] + srcs[ok]
            vb = lay.offsets[j] + cand[ok]
            keep = va != vb
            a.append(va[keep])
            b.append(vb[keep])
            w.append(d[ok][keep])
    return np.concatenate(a), np.concatenate(b), np.concatenate(w)


def _polar_coords(lay: PolarLayout):
    out = np.zeros((lay.n_vertices, 2))
    for i in range(1, lay.n_rings):
        n = int(lay.counts[i])
        th = 2 * math.pi * np.arange(n) / n
        r = i * lay.h
        sl = slice(int(lay.offsets[i]), int(lay.offsets[i]) + n)
        out[sl, 0] = r * np.cos(th)
        out[sl, 1] = r * np.sin(th)
    return out


# neighbor reach for the polar grid, in units of h
POLAR_REACH = 2.3


def _hyperbolic_graph(max_r, h, vertex_cap, family):
    if max_r < 5:
        raise InputError("hyperbolic builders need max_r >= 5")
    lay = polar_layout(max_r, h)
    _check_budget(lay.n_vertices, vertex_cap)
    a, b, w = _polar_edges(lay, POLAR_REACH * h)
    return lay, a, b, w, _polar_coords(lay)


def build_hyperbolic_plane(max_r: float, h: float = 0.2, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """Polar grid of the hyperbolic disk of radius ``max_r``; base path is a diameter."""
    lay, a, b, w, coords = _hyperbolic_graph(max_r, h, vertex_cap, "hyperbolic_plane")
    g = SpaceGraph(lay.n_vertices, a, b, w, h, "hyperbolic_plane", coords=coords)
    m = lay.n_rings - 1
    base = [lay.axis_vertex(i) for i in range(-m, m + 1)]
    return _entry(g, base, Expected(True, True, QUADRATIC), {"max_r": max_r, "h": h})


def hyperbolic_layout(entry: ZooEntry) -> PolarLayout:
    return polar_layout(entry.params["max_r"], entry.params["h"])


# regular tree -----------------------------------------------------------

def _tree_arrays(degree: int, depth: int, vertex_cap: int):
    """BFS-ordered regular tree: returns (parent, depth_of) arrays."""
    n = 1 + degree * sum((degree - 1) ** k for k in range(depth))
    _check_budget(n, vertex_cap)
    parent = np.full(n, -1, dtype=np.int64)
    level = np.zeros(n, dtype=np.int64)
    frontier = [0]
    nxt = 1
    for dep in range(1, depth + 1):
        new = []
        for v in frontier:
            kids = degree if v == 0 else degree - 1
            for _ in range(kids):
                parent[nxt] = v
                level[nxt] = dep
                new.append(nxt)
                nxt += 1
        frontier = new
    return parent, level


def _tree_diameter(parent: np.ndarray, level: np.ndarray, depth: int):
    """Leaf-to-leaf path through the root via the first two root children."""
    def leftmost_leaf(child):
        v = child
        while level[v] < depth:
            v = int(np.flatnonzero(parent == v)[0])
        return v

    def to_root(v):
        out = [v]
        while parent[out[-1]] >= 0:
            out.append(int(parent[out[-1]]))
        return out

    children = np.flatnonzero(parent == 0)
    left = to_root(leftmost_leaf(int(children[0])))
    right = to_root(leftmost_leaf(int(children[1])))
    return left + right[::-1][1:]


def _check_tree_args(degree, depth):
    if int(degree) != degree or degree < 3:
        raise InputError("tree degree must be an integer >= 3")
    if int(depth) != depth or depth < 4:
        raise InputError("tree depth must be an integer >= 4")


def build_regular_tree(degree: int = 3, depth: int = 8, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """Unit-edge regular tree truncated at ``depth``; base path is a leaf-to-leaf diameter."""
    _check_tree_args(degree, depth)
    parent, level = _tree_arrays(int(degree), int(depth), vertex_cap)
    kids = np.arange(1, parent.size)
    g = SpaceGraph(parent.size, kids, parent[kids], np.ones(kids.size), 1.0, "regular_tree")
    base = _tree_diameter(parent, level, int(depth))
    return _entry(g, base, Expected(True, True, INFINITE), {"degree": degree, "depth": depth})


def tree_parents(entry: ZooEntry) -> np.ndarray:
    """Parent array (root has -1) of a regular_tree entry, BFS ordered."""
    parent, _ = _tree_arrays(entry.params["degree"], entry.params["depth"], DEFAULT_VERTEX_CAP)
    return parent


# plane wedge ------------------------------------------------------------

def build_plane_wedge(halfwidth: float, h: float = 1.0, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """Two grid planes sharing their origin; base path runs along both x-axes."""
    if halfwidth < 20 * h:
        raise InputError("plane_wedge needs halfwidth >= 20h")
    k = _steps(halfwidth, h, "halfwidth")
    side = 2 * k + 1
    per = side * side
    _check_budget(2 * per - 1, vertex_cap)
    _, ids_a, coords_a = _plane_arrays(halfwidth, h)
    origin = int(ids_a[k, k])
    # plane B reuses plane A's origin id and numbers its other vertices after A
    ids_b = ids_a + per
    ids_b[ids_b > origin + per] -= 1
    ids_b[k, k] = origin
    a1, b1, w1 = _grid_edges(ids_a, h)
    a2, b2, w2 = _grid_edges(ids_b, h)
    coords_b = np.delete(coords_a, origin, axis=0)
    coords = np.concatenate([coords_a, coords_b])
    g = SpaceGraph(2 * per - 1, np.concatenate([a1, a2]), np.concatenate([b1, b2]),
                   np.concatenate([w1, w2]), h, "plane_wedge", coords=coords)
    base = list(ids_a[:k + 1, k]) + list(ids_b[k + 1:, k])
    return _entry(g, base, Expected(False, False, INFINITE), {"halfwidth": halfwidth, "h": h})


def wedge_vertex(entry: ZooEntry, plane: str, x: float, y: float) -> int:
    """Vertex id of ``(x, y)`` in plane ``"A"`` or ``"B"`` of a plane_wedge entry."""
    h, hw = entry.params["h"], entry.params["halfwidth"]
    k = int(round(hw / h))
    side = 2 * k + 1
    ix, iy = int(round(x / h)) + k, int(round(y / h)) + k
    if not (0 <= ix < side and 0 <= iy < side):
        raise InputError(f"point ({x}, {y}) outside the plane")
    v = ix * side + iy
    origin = k * side + k
    if plane == "A" or v == origin:
        return v
    if plane != "B":
        raise InputError("plane must be 'A' or 'B'")
    return v + side * side - (1 if v > origin else 0)


# hyperbolic plane with a glued flat strip ------------------------------

def build_strip_glued_hyperbolic(max_r: float, strip_halfwidth: float, h: float = 0.2,
                                 vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """Hyperbolic polar grid with the flat strip ``[-max_r, max_r] x [0, strip_halfwidth]``
    glued along the theta=0/pi diameter.

    Strip vertices above the seam carry no chart coordinates.
    """
    m = _steps(max_r, h, "max_r")
    ks = _steps(strip_halfwidth, h, "strip_halfwidth")
    if ks < 1:
        raise InputError("strip_halfwidth must be at least h")
    lay = polar_layout(max_r, h)
    n_strip = (2 * m + 1) * ks
    _check_budget(lay.n_vertices + n_strip, vertex_cap)
    a1, b1, w1, coords = _hyperbolic_graph(max_r, h, vertex_cap, "strip_glued_hyperbolic")[1:]
    ids = np.empty((2 * m + 1, ks + 1), dtype=np.int64)
    ids[:, 0] = [lay.axis_vertex(i) for i in range(-m, m + 1)]
    ids[:, 1:] = lay.n_vertices + np.arange(n_strip).reshape(2 * m + 1, ks)
    a2, b2, w2 = _grid_edges(ids, h)
    coords = np.concatenate([coords, np.full((n_strip, 2), np.nan)])
    g = SpaceGraph(lay.n_vertices + n_strip, np.concatenate([a1, a2]), np.concatenate([b1, b2]),
                   np.concatenate([w1, w2]), h, "strip_glued_hyperbolic", coords=coords)
    return _entry(g, list(ids[:, 0]), Expected(False, False, LINEAR),
                  {"max_r": max_r, "strip_halfwidth": strip_halfwidth, "h": h})


def strip_vertex(entry: ZooEntry, x: float, y: float) -> int:
    """Vertex id of strip point ``(x, y)``; ``y == 0`` lands on the seam."""
    h, max_r = entry.params["h"], entry.params["max_r"]
    m, ks = int(round(max_r / h)), int(round(entry.params["strip_halfwidth"] / h))
    ix, iy = int(round(x / h)), int(round(y / h))
    if not (-m <= ix <= m and 0 <= iy <= ks):
        raise InputError(f"point ({x}, {y}) outside the strip")
    lay = polar_layout(max_r, h)
    if iy == 0:
        return lay.axis_vertex(ix)
    return lay.n_vertices + (ix + m) * ks + (iy - 1)


# tree x line ------------------------------------------------------------

def build_tree_cross_line(degree: int = 3, depth: int = 8, halfwidth: float = 12.0, h: float = 1.0,
                          vertex_cap: int = DEFAULT_VERTEX_CAP) -> ZooEntry:
    """l2 product of a unit-edge regular tree with ``[-halfwidth, halfwidth]``.

    Vertex ``(t, k)`` has id ``t * n_line + k``.  Besides the factor edges the
    stencil joins tree-adjacent vertices at line offsets +-1, +-2 and vertices
    at tree distance 2 at line offsets +-1, each weighted by its product length.
    """
    _check_tree_args(degree, depth)
    k = _steps(halfwidth, h, "halfwidth")
    n_line = 2 * k + 1
    n_tree = 1 + degree * sum((degree - 1) ** j for j in range(depth))
    _check_budget(n_tree * n_line, vertex_cap)
    parent, level = _tree_arrays(int(degree), int(depth), vertex_cap)
    kids = np.arange(1, n_tree)
    near = [(kids, parent[kids])]
    far = []
    grand = parent[kids]
    has_grand = grand > 0
    far.append((kids[has_grand], parent[grand[has_grand]]))
    # siblings share a parent: all pairs within each child group
    order = np.argsort(parent[kids], kind="stable")
    sorted_kids = kids[order]
    sorted_par = parent[sorted_kids]
    starts = np.flatnonzero(np.r_[True, sorted_par[1:] != sorted_par[:-1]])
    ends = np.r_[starts[1:], sorted_kids.size]
    sa, sb = [], []
    for s0, s1 in zip(starts, ends):
        group = sorted_kids[s0:s1]
        i, j = np.triu_indices(group.size, k=1)
        sa.append(group[i])
        sb.append(group[j])
    far.append((np.concatenate(sa), np.concatenate(sb)))

    line = np.arange(n_line)
    a, b, w = [], [], []

    def add(ta, tb, dt, dk):
        lo, hi = max(0, -dk), n_line - max(0, dk)
        ka = line[lo:hi]
        a.append((ta[:, None] * n_line + ka[None, :]).ravel())
        b.append((tb[:, None] * n_line + ka[None, :] + dk).ravel())
        w.append(np.full(ta.size * ka.size, math.hypot(dt, dk * h)))

    all_t = np.arange(n_tree)
    add(all_t, all_t, 0, 1)
    for ta, tb in near:
        for dk in (-2, -1, 0, 1, 2):
            add(ta, tb, 1, dk)
    for ta, tb in far:
        for dk in (-1, 1):
            add(ta, tb, 2, dk)
    g = SpaceGraph(n_tree * n_line, np.concatenate(a), np.concatenate(b), np.concatenate(w),
                   max(1.0, h), "tree_cross_line")
    diam = _tree_diameter(parent, level, int(depth))
    base = [t * n_line + k for t in diam]
    return _entry(g, base, Expected(False, False, LINEAR),
                  {"degree": degree, "depth": depth, "halfwidth": halfwidth, "h": h})


def product_vertex(entry: ZooEntry, tree_vertex: int, x: float) -> int:
    h, hw = entry.params["h"], entry.params["halfwidth"]
    k = int(round(hw / h))
    return int(tree_vertex) * (2 * k + 1) + int(round(x / h)) + k


# registry ---------------------------------------------------------------

FAMILIES = {
    "euclidean_plane": (build_euclidean_plane, {"halfwidth": 40.0, "h": 1.0}),
    "hyperbolic_plane": (build_hyperbolic_plane, {"max_r": 6.0, "h": 0.2}),
    "regular_tree": (build_regular_tree, {"degree": 3, "depth": 9}),
    "plane_wedge": (build_plane_wedge, {"halfwidth": 40.0, "h": 1.0}),
    "strip_glued_hyperbolic": (build_strip_glued_hyperbolic,
                               {"max_r": 6.0, "strip_halfwidth": 8.0, "h": 0.2}),
    "tree_cross_line": (build_tree_cross_line,
                        {"degree": 3, "depth": 8, "halfwidth": 12.0, "h": 1.0}),
}


def build(family: str, vertex_cap: int = DEFAULT_VERTEX_CAP, **params) -> ZooEntry:
    """Build a family by name; unspecified parameters take their defaults."""
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; known: {', '.join(FAMILIES)}")
    builder, defaults = FAMILIES[family]
    unknown = set(params) - set(defaults)
    if unknown:
        raise InputError(f"unknown parameter(s) for {family}: {', '.join(sorted(unknown))}")
    args = {**defaults, **params}
    return builder(**args, vertex_cap=vertex_cap)
