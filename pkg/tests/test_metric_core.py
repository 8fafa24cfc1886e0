import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cat0probe.errors import InputError, PreconditionError
from cat0probe.metric_core import (
    UNREACHABLE,
    PathInSpace,
    QuasiGeodesicConstants,
    SpaceGraph,
    concat_paths,
    hausdorff_distance,
    is_geodesic,
    path_length,
    point_at_arclength,
    punctured_distance,
    punctured_path,
    shortest_distance,
    shortest_path,
    tightest_quasi_constants,
    verify_quasi_geodesic,
)
from cat0probe.space_zoo import plane_vertex

from conftest import binary_tree, to_networkx

FAST = settings(max_examples=40, deadline=None)


def _line(g, entry, pts):
    """Concatenate shortest paths through grid points ``pts``."""
    vs = [plane_vertex(entry, x, y) for x, y in pts]
    return concat_paths(*[shortest_path(g, a, b) for a, b in zip(vs, vs[1:])])


# shortest_distance ------------------------------------------------------

def test_distance_to_self_is_zero(hyper):
    assert shortest_distance(hyper.graph, 17, 17) == 0.0


def test_grid_distance_3_4_5(grid):
    g = grid.graph
    d = shortest_distance(g, plane_vertex(grid, 0, 0), plane_vertex(grid, 3, 4))
    assert d == pytest.approx(5.0, rel=0.03)


def test_binary_tree_root_to_leaf():
    g = binary_tree(6)
    assert shortest_distance(g, 0, g.n_vertices - 1) == 6.0


def test_distances_match_networkx(hyper):
    g = hyper.graph
    G = to_networkx(g)
    rng = np.random.default_rng(5)
    for u, v in rng.integers(0, g.n_vertices, size=(15, 2)):
        oracle = nx.dijkstra_path_length(G, int(u), int(v))
        assert shortest_distance(g, u, v) == pytest.approx(oracle, rel=1e-12, abs=1e-12)


def test_unknown_vertex_rejected(tree):
    with pytest.raises(InputError):
        shortest_distance(tree.graph, 0, tree.graph.n_vertices)
    with pytest.raises(InputError):
        shortest_path(tree.graph, -1, 0)


# shortest_path ----------------------------------------------------------

def test_trivial_path(tree):
    p = shortest_path(tree.graph, 3, 3)
    assert len(p) == 1 and p.length == 0.0


def test_axis_path_stays_in_tube(grid):
    g = grid.graph
    p = shortest_path(g, plane_vertex(grid, -5, 0), plane_vertex(grid, 5, 0))
    xy = g.coords[p.vertices]
    assert np.all(np.abs(xy[:, 1]) <= g.scale_h)
    assert np.all((xy[:, 0] >= -5 - 1e-9) & (xy[:, 0] <= 5 + 1e-9))


def test_tree_path_is_the_unique_simple_path(tree):
    g = tree.graph
    G = to_networkx(g)
    leaves = [v for v in G if G.degree(v) == 1]
    u, v = leaves[0], leaves[-1]
    assert list(shortest_path(g, u, v).vertices) == nx.shortest_path(G, u, v)


def test_path_is_deterministic_and_geodesic(grid):
    g = grid.graph
    u, v = plane_vertex(grid, -7, 3), plane_vertex(grid, 12, -9)
    p1, p2 = shortest_path(g, u, v), shortest_path(g, u, v)
    assert np.array_equal(p1.vertices, p2.vertices)
    assert p1.length == pytest.approx(shortest_distance(g, u, v), rel=1e-12)
    assert is_geodesic(g, p1)


def test_path_invariants_enforced(tree):
    with pytest.raises(InputError):
        PathInSpace.from_vertices(tree.graph, [0, 0])
    with pytest.raises(InputError):
        PathInSpace.from_vertices(tree.graph, [1, 2])  # siblings, not adjacent


# punctured_distance -----------------------------------------------------

def test_zero_radius_puncture_is_plain_distance(grid):
    g = grid.graph
    u, v, c = plane_vertex(grid, -9, 2), plane_vertex(grid, 11, -4), plane_vertex(grid, 0, 0)
    assert punctured_distance(g, u, v, c, 0.0) == pytest.approx(shortest_distance(g, u, v))


def test_semicircle_detour(grid):
    g = grid.graph
    r = 50
    u, v, c = plane_vertex(grid, -r, 0), plane_vertex(grid, r, 0), plane_vertex(grid, 0, 0)
    assert punctured_distance(g, u, v, c, r) == pytest.approx(math.pi * r, rel=0.05)
    p = punctured_path(g, u, v, c, r)
    assert path_length(p) == pytest.approx(math.pi * r, rel=0.05)
    assert g.distances_from(c)[p.vertices].min() >= r - 1e-9


def test_tree_puncture_disconnects(tree):
    g, base = tree.graph, tree.base_path
    mid = base.length / 2
    u, v = point_at_arclength(base, mid - 2), point_at_arclength(base, mid + 2)
    c = point_at_arclength(base, mid)
    assert punctured_distance(g, u, v, c, 1.0) == UNREACHABLE
    assert punctured_path(g, u, v, c, 1.0) is None


def test_endpoint_inside_ball_rejected(grid):
    g = grid.graph
    c = plane_vertex(grid, 0, 0)
    with pytest.raises(PreconditionError):
        punctured_distance(g, plane_vertex(grid, 1, 0), plane_vertex(grid, 10, 0), c, 5.0)


# path_length / point_at_arclength --------------------------------------

def test_path_lengths(tree):
    g = tree.graph
    assert path_length(PathInSpace.from_vertices(g, [0])) == 0.0
    assert path_length(PathInSpace.from_vertices(g, [4, 1, 0])) == 2.0


def test_point_at_arclength(grid):
    g = grid.graph
    p = shortest_path(g, plane_vertex(grid, 0, 0), plane_vertex(grid, 10, 0))
    assert point_at_arclength(p, 0) == p.vertices[0]
    assert point_at_arclength(p, p.length) == p.vertices[-1]
    m = point_at_arclength(p, p.length / 2)
    assert np.hypot(*(g.coords[m] - (5, 0))) <= g.scale_h
    with pytest.raises(InputError):
        point_at_arclength(p, p.length + 1)
    with pytest.raises(InputError):
        point_at_arclength(p, -0.5)


def test_point_at_arclength_tie_goes_to_earlier_vertex(tree):
    p = PathInSpace.from_vertices(tree.graph, [4, 1, 0])
    assert point_at_arclength(p, 0.5) == 4
    assert point_at_arclength(p, 1.5) == 1


# hausdorff_distance -----------------------------------------------------

def test_hausdorff_examples(grid):
    g = grid.graph
    a = _line(g, grid, [(-10, 0), (10, 0)])
    b = _line(g, grid, [(-10, 3), (10, 3)])
    assert hausdorff_distance(g, a, a) == 0.0
    assert hausdorff_distance(g, a, b) == pytest.approx(3.0, rel=0.03)
    half = a.subpath(0, int(np.searchsorted(a.cum_len, a.length / 2)))
    # brute force over vertex pairs
    xy = g.coords
    brute = max(np.hypot(*(xy[a.vertices][:, None] - xy[half.vertices][None]).T).min(axis=0))
    assert hausdorff_distance(g, a, half) >= (a.length / 2) * (1 - 0.03)
    assert hausdorff_distance(g, a, half) == pytest.approx(brute, rel=0.03)


# quasi-geodesics -------------------------------------------------------

def test_straight_segment_is_quasi_geodesic(grid):
    g = grid.graph
    p = _line(g, grid, [(-30, 0), (30, 0)])
    w = verify_quasi_geodesic(g, p, QuasiGeodesicConstants(1.1, 2 * g.scale_h), 200, 0)
    assert w.holds and w.margin >= 0


def test_huge_constants_always_hold(grid):
    g = grid.graph
    p = _line(g, grid, [(-5, 0), (-5, 50), (5, 50), (5, 0)])
    assert verify_quasi_geodesic(g, p, QuasiGeodesicConstants(1e6, 1e6), 50, 1).holds


def test_rectangle_bulge_fails():
    from cat0probe.space_zoo import build_euclidean_plane
    e = build_euclidean_plane(60.0, 1.0)
    g = e.graph
    p = _line(g, e, [(-5, 0), (-5, 50), (5, 50), (5, 0)])
    w = verify_quasi_geodesic(g, p, QuasiGeodesicConstants(2.0, 1.0), 100, 2)
    assert not w.holds
    s, t, lower, d, upper = w.worst_pair
    assert not (lower <= d <= upper)
    # the bulge endpoints are the natural violators: far in arclength, close in space
    assert abs(s - t) > 50


def test_tightest_constants(grid):
    g = grid.graph
    straight = _line(g, grid, [(-20, 0), (20, 0)])
    assert tightest_quasi_constants(g, straight, 200, 0).K <= 1.1
    single = PathInSpace.from_vertices(g, [plane_vertex(grid, 0, 0)])
    assert tightest_quasi_constants(g, single, 10, 0).K == 1.0
    r = 20
    arc = punctured_path(g, plane_vertex(grid, -r, 0), plane_vertex(grid, r, 0), plane_vertex(grid, 0, 0), r)
    assert tightest_quasi_constants(g, arc, 400, 0).K == pytest.approx(math.pi / 2, rel=0.10)


def test_tightest_constants_pass_verification(hyper):
    g = hyper.graph
    p = shortest_path(g, 3, g.n_vertices - 7)
    k = tightest_quasi_constants(g, p, 100, 9)
    assert k.L == 2 * g.scale_h
    assert verify_quasi_geodesic(g, p, k, 100, 9).holds


def test_quasi_constants_validated():
    with pytest.raises(InputError):
        QuasiGeodesicConstants(0.5, 0.0)
    with pytest.raises(InputError):
        QuasiGeodesicConstants(1.0, -1.0)


# serialization ----------------------------------------------------------

def test_graph_json_roundtrip(hyper, tmp_path):
    g = hyper.graph
    g.save(tmp_path / "g.json")
    g2 = SpaceGraph.load(tmp_path / "g.json")
    assert g2.to_json() == g.to_json()
    doc = json.loads(g.to_json())
    assert set(doc) == {"family_tag", "scale_h", "vertices", "edges"}


def test_malformed_graph_rejected():
    with pytest.raises(InputError):
        SpaceGraph.from_json_dict({"vertices": [{"id": 0}]})


# properties -------------------------------------------------------------

vertex_triples = st.tuples(*(st.integers(0, 10_000) for _ in range(3)))


@FAST
@given(vertex_triples)
def test_metric_axioms(hyper, ijk):
    g = hyper.graph
    u, v, w = (i % g.n_vertices for i in ijk)
    d = lambda a, b: shortest_distance(g, a, b)  # noqa: E731
    assert d(u, v) == d(v, u)
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-12 * (1 + d(u, w))
    assert d(u, v) >= 0 and (d(u, v) == 0) == (u == v)


@FAST
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_shortest_path_realizes_distance(hyper, i, j):
    g = hyper.graph
    u, v = i % g.n_vertices, j % g.n_vertices
    assert shortest_path(g, u, v).length == pytest.approx(shortest_distance(g, u, v), rel=1e-12, abs=0)


@FAST
@given(st.integers(-15, 15), st.integers(-15, 15), st.floats(0.0, 8.0), st.floats(0.0, 8.0))
def test_puncture_dominates_and_is_monotone(small_grid, x, y, r1, r2):
    e = small_grid
    g = e.graph
    u, v, c = plane_vertex(e, -18, 0), plane_vertex(e, 18, 0), plane_vertex(e, x, y)
    dc = g.distances_from(c)
    lo, hi = sorted((r1, r2))
    hi = min(hi, dc[u], dc[v])
    lo = min(lo, hi)
    d0 = shortest_distance(g, u, v)
    d_lo, d_hi = punctured_distance(g, u, v, c, lo), punctured_distance(g, u, v, c, hi)
    assert d_lo >= d0 - 1e-9
    assert d_hi >= d_lo - 1e-9


@FAST
@given(st.lists(st.tuples(st.integers(-18, 18), st.integers(-18, 18)), min_size=3, max_size=3))
def test_hausdorff_is_pseudometric(small_grid, ends):
    e = small_grid
    g = e.graph
    paths = [_line(g, e, [(0, 0), p]) for p in ends]
    hd = lambda a, b: hausdorff_distance(g, a, b)  # noqa: E731
    a, b, c = paths
    assert hd(a, b) == hd(b, a)
    assert hd(a, c) <= hd(a, b) + hd(b, c) + 1e-12
    assert hd(a, a) == 0


@FAST
@given(st.floats(1.0, 4.0), st.floats(0.0, 5.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0),
       st.integers(0, 2**31))
def test_quasi_verification_is_monotone(small_grid, K, L, dK, dL, seed):
    e = small_grid
    g = e.graph
    p = _line(g, e, [(-10, 0), (-10, 8), (10, 8), (10, 0)])
    w = verify_quasi_geodesic(g, p, QuasiGeodesicConstants(K, L), 30, seed)
    w2 = verify_quasi_geodesic(g, p, QuasiGeodesicConstants(K + dK, L + dL), 30, seed)
    if w.holds:
        assert w2.holds
    assert w2.margin >= w.margin - 1e-12


@FAST
@given(st.integers(0, 2**31))
def test_quasi_verification_is_deterministic(small_grid, seed):
    e = small_grid
    g = e.graph
    p = _line(g, e, [(-10, 0), (0, 10), (10, 0)])
    k = QuasiGeodesicConstants(1.2, 0.5)
    assert verify_quasi_geodesic(g, p, k, 40, seed) == verify_quasi_geodesic(g, p, k, 40, seed)
