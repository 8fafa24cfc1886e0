import math

import numpy as np
import pytest

from cat0probe import space_zoo
from cat0probe.errors import BudgetExceeded, InputError
from cat0probe.metric_core import (
    QuasiGeodesicConstants,
    UNREACHABLE,
    is_geodesic,
    point_at_arclength,
    punctured_distance,
    shortest_distance,
    verify_quasi_geodesic,
)
from cat0probe.space_zoo import (
    build_hyperbolic_plane,
    hyperbolic_layout,
    model_distance,
    plane_vertex,
    product_vertex,
    strip_vertex,
    tree_parents,
    wedge_vertex,
)

ENTRIES = ["grid", "hyper", "tree", "wedge", "strip", "product"]


@pytest.fixture(params=ENTRIES)
def entry(request):
    return request.getfixturevalue(request.param)


# every entry ------------------------------------------------------------

def test_graph_invariants(entry):
    g = entry.graph
    assert np.all(g.edge_len > 0)
    assert np.isfinite(g.distances_from(0)).all()  # connected
    csr = g.csr
    assert (csr != csr.T).nnz == 0  # symmetric


def test_embedded_edges_match_model(entry):
    g = entry.graph
    if g.coords is None or g.family_tag not in ("euclidean_plane", "hyperbolic_plane",
                                                 "plane_wedge", "strip_glued_hyperbolic"):
        pytest.skip("no chart")
    ok = ~np.isnan(g.coords[g.edge_a, 0]) & ~np.isnan(g.coords[g.edge_b, 0])
    if g.family_tag == "plane_wedge":
        # plane B reuses plane A's chart, so only same-plane edges are comparable
        n = len(g.coords)
        ok &= (g.edge_a < (n + 1) // 2) == (g.edge_b < (n + 1) // 2)
    model = model_distance(g.family_tag, g.coords[g.edge_a[ok]], g.coords[g.edge_b[ok]])
    assert np.all(np.abs(g.edge_len[ok] - model) <= 0.01 * model)


def test_base_path_is_geodesic_and_quasi_geodesic(entry):
    g, p = entry.graph, entry.base_path
    assert is_geodesic(g, p)
    assert verify_quasi_geodesic(g, p, QuasiGeodesicConstants(1.1, 2 * g.scale_h), 100, 0).holds


def test_builders_are_deterministic():
    for fam in ("euclidean_plane", "regular_tree", "tree_cross_line"):
        small = {"euclidean_plane": {"halfwidth": 20.0}, "regular_tree": {"depth": 5},
                 "tree_cross_line": {"depth": 4, "halfwidth": 5.0}}[fam]
        a, b = space_zoo.build(fam, **small), space_zoo.build(fam, **small)
        assert a.graph.to_json() == b.graph.to_json()


def test_budget_cap_enforced():
    with pytest.raises(BudgetExceeded):
        space_zoo.build("euclidean_plane", vertex_cap=100, halfwidth=20.0)


def test_unknown_family_and_params():
    with pytest.raises(InputError):
        space_zoo.build("klein_bottle")
    with pytest.raises(InputError):
        space_zoo.build("regular_tree", radius=3)


def test_preconditions():
    with pytest.raises(InputError):
        space_zoo.build_euclidean_plane(10.0, 1.0)
    with pytest.raises(InputError):
        space_zoo.build_regular_tree(2, 6)
    with pytest.raises(InputError):
        space_zoo.build_regular_tree(3, 3)
    with pytest.raises(InputError):
        build_hyperbolic_plane(4.0, 0.2)


# euclidean plane --------------------------------------------------------

def test_plane_distances(grid):
    g = grid.graph
    o = plane_vertex(grid, 0, 0)
    assert shortest_distance(g, o, plane_vertex(grid, 10, 0)) == pytest.approx(10, rel=0.03)
    assert shortest_distance(g, o, plane_vertex(grid, 3, 4)) == pytest.approx(5, rel=0.03)
    assert grid.base_path.length == pytest.approx(2 * 60, rel=0.01)


def test_stencil_distortion_below_three_percent(grid):
    g = grid.graph
    o = plane_vertex(grid, 0, 0)
    d = g.distances_from(o)
    far = np.hypot(*g.coords.T) >= 10
    ratio = d[far] / np.hypot(*g.coords[far].T)
    assert ratio.min() >= 1.0 - 1e-12 and ratio.max() <= 1.03


def test_expected_records(grid, hyper, tree, wedge, strip, product):
    assert grid.expected.to_dict() == {"morse": "no", "contracting": "no", "divergence_class": "linear"}
    assert hyper.expected.divergence_class == "at-least-quadratic" and hyper.expected.morse
    assert tree.expected.divergence_class == "infinite" and tree.expected.contracting
    assert wedge.expected.divergence_class == "infinite" and not wedge.expected.morse
    assert strip.expected.divergence_class == "linear" and not strip.expected.contracting
    assert product.expected.divergence_class == "linear" and not product.expected.morse


# hyperbolic plane -------------------------------------------------------

@pytest.fixture(scope="module")
def hyper6():
    return build_hyperbolic_plane(6.0, 0.2)


def test_radial_distance(hyper6):
    lay = hyperbolic_layout(hyper6)
    assert shortest_distance(hyper6.graph, 0, lay.axis_vertex(25)) == pytest.approx(5.0, rel=0.02)


def test_circumference_at_radius_three(hyper6):
    g = hyper6.graph
    lay = hyperbolic_layout(hyper6)
    ring = int(round(3 / lay.h))
    ids = [lay.vertex(ring, i) for i in range(lay.counts[ring])] + [lay.vertex(ring, 0)]
    walk = sum(g.edge_length(a, b) for a, b in zip(ids, ids[1:]))
    assert walk == pytest.approx(2 * math.pi * math.sinh(3), rel=0.05)


def test_antipodal_rays(hyper6):
    lay = hyperbolic_layout(hyper6)
    d = shortest_distance(hyper6.graph, lay.axis_vertex(25), lay.axis_vertex(-25))
    oracle = space_zoo.hyperbolic_distance(5.0, 0.0, 5.0, math.pi)
    assert oracle == pytest.approx(10.0)
    assert d == pytest.approx(oracle, rel=0.03)


def test_hyperbolic_distances_against_model(hyper6):
    g = hyper6.graph
    rng = np.random.default_rng(3)
    src = rng.integers(0, g.n_vertices, 5)
    xy = g.coords
    for s in src:
        d = g.distances_from(s)
        model = model_distance("hyperbolic_plane", np.broadcast_to(xy[s], xy.shape), xy)
        far = model > 2.0
        assert np.all(np.abs(d[far] / model[far] - 1) <= 0.05)


# tree -------------------------------------------------------------------

def test_tree_paths_unique(tree):
    g = tree.graph
    assert g.n_edges == g.n_vertices - 1


def test_tree_root_puncture(tree):
    g, p = tree.graph, tree.base_path
    mid = p.length / 2
    root = point_at_arclength(p, mid)
    assert root == 0
    u, v = p.vertices[0], p.vertices[-1]
    assert punctured_distance(g, u, v, root, 1.0) == UNREACHABLE


def test_tree_projection_is_branch_vertex(tree):
    from cat0probe.metric_core import project_onto_path
    g, p = tree.graph, tree.base_path
    parent = tree_parents(tree)
    on_path = set(int(v) for v in p.vertices)
    _, pos = project_onto_path(g, p)
    foot = p.vertices[pos]
    for v in range(g.n_vertices):
        w = v
        while w not in on_path:
            w = parent[w]
        assert foot[v] == w


# wedge ------------------------------------------------------------------

def test_wedge_concatenation(wedge):
    g = wedge.graph
    a, b, o = wedge_vertex(wedge, "A", 3, 4), wedge_vertex(wedge, "B", -6, 8), wedge_vertex(wedge, "A", 0, 0)
    assert o == wedge_vertex(wedge, "B", 0, 0)
    d = shortest_distance(g, a, b)
    assert d == pytest.approx(shortest_distance(g, a, o) + shortest_distance(g, o, b), rel=1e-12)
    assert d == pytest.approx(15, rel=0.03)


def test_wedge_cut_vertex(wedge):
    g = wedge.graph
    o = wedge_vertex(wedge, "A", 0, 0)
    for r in (1.0, 2.0, 5.0):
        assert punctured_distance(g, wedge_vertex(wedge, "A", -10, 0), wedge_vertex(wedge, "B", 10, 0),
                                  o, r) == UNREACHABLE


def test_wedge_plane_isometric_to_grid(wedge, small_grid):
    rng = np.random.default_rng(8)
    for x1, y1, x2, y2 in rng.integers(-20, 21, size=(5, 4)):
        dA = shortest_distance(wedge.graph, wedge_vertex(wedge, "A", x1, y1), wedge_vertex(wedge, "A", x2, y2))
        dB = shortest_distance(wedge.graph, wedge_vertex(wedge, "B", x1, y1), wedge_vertex(wedge, "B", x2, y2))
        dG = shortest_distance(small_grid.graph, plane_vertex(small_grid, x1, y1),
                               plane_vertex(small_grid, x2, y2))
        assert dA == pytest.approx(dG, rel=1e-12) and dB == pytest.approx(dG, rel=1e-12)


# strip ------------------------------------------------------------------

def test_strip_detour_linear(strip):
    g = strip.graph
    c = strip_vertex(strip, 0, 0)
    for r in (1.0, 2.0, 3.0):
        d = punctured_distance(g, strip_vertex(strip, -r, 0), strip_vertex(strip, r, 0), c, r)
        # flat-side semicircle oracle with one stencil unit of slack per unit radius
        assert 2 * r - 2 * g.scale_h <= d <= 2 * r + math.pi * r + 4 * g.scale_h


def test_strip_hyperbolic_side_unchanged(strip):
    plain = build_hyperbolic_plane(5.0, 0.25)
    lay = hyperbolic_layout(plain)
    ring = int(round(4 / lay.h))
    q = lay.counts[ring] // 4
    u, v = lay.vertex(ring, 3 * q - q // 3), lay.vertex(ring, 3 * q + q // 3)  # lower half-plane
    assert shortest_distance(strip.graph, u, v) == pytest.approx(shortest_distance(plain.graph, u, v), rel=0.03)


# tree x line -----------------------------------------------------------

def test_product_distances(product):
    g = product.graph
    parent = tree_parents(space_zoo.build_regular_tree(3, 5))
    leaves = [v for v in range(len(parent)) if v not in set(parent)]
    root = 0
    assert shortest_distance(g, product_vertex(product, root, 0),
                             product_vertex(product, root, 5)) == pytest.approx(5, rel=0.03)
    l1, l2 = leaves[0], leaves[-1]
    assert shortest_distance(g, product_vertex(product, l1, 0),
                             product_vertex(product, l2, 0)) == pytest.approx(10, rel=0.05)
    # mixed pair: tree distance 5 (root to leaf), line offset 6
    d = shortest_distance(g, product_vertex(product, root, -3), product_vertex(product, l1, 3))
    assert d == pytest.approx(math.hypot(5, 6), rel=0.05)
