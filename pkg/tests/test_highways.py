import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from airhighway.errors import DegenerateEdge, DegeneratePath, SOutOfRange
from airhighway.highways import (Highway, HighwayGraph, Waypoint, build_graph, cluster_paths, cluster_waypoints,
                                 highway_state, polyline_deviation, sparsify_by_heading)

TEN = math.radians(10)


def _brute_force_count(points, theta_c):
    """Reference accumulator walk: count threshold crossings with reset."""
    h = np.arctan2(*np.diff(points, axis=0).T[::-1])
    ref, n = h[0], 0
    for a in h[1:]:
        if abs((a - ref + np.pi) % (2 * np.pi) - np.pi) > theta_c:
            n += 1
            ref = a
    return n


def test_straight_path():
    pts = np.c_[np.linspace(0, 99, 100), np.zeros(100)]
    w = sparsify_by_heading(pts, TEN)
    assert [x.position for x in w] == [(0.0, 0.0), (99.0, 0.0)]
    assert [x.provenance for x in w] == ["origin", "destination"]


def test_l_shape():
    pts = np.r_[np.c_[np.arange(0, 51), np.zeros(51)], np.c_[np.full(50, 50), np.arange(1, 51)]].astype(float)
    w = sparsify_by_heading(pts, TEN)
    assert len(w) == 3
    assert w[1].position == (50.0, 0.0)


def test_quarter_circle():
    th = np.linspace(0, np.pi / 2, 1000)
    pts = 100 * np.c_[np.cos(th), np.sin(th)]
    w = sparsify_by_heading(pts, math.radians(30))
    assert len(w) - 2 == 2 == _brute_force_count(pts, math.radians(30))


def test_degenerate():
    with pytest.raises(DegeneratePath):
        sparsify_by_heading([(1.0, 1.0), (1.0, 1.0)])


@given(st.integers(0, 2**31), st.floats(0.05, 3.0))
def test_sparsify_properties(seed, theta):
    pts = np.cumsum(np.random.default_rng(seed).normal(size=(60, 2)), axis=0)
    w = sparsify_by_heading(pts, theta)
    assert 2 <= len(w) <= len(pts)
    assert w[0].position == tuple(pts[0]) and w[-1].position == tuple(pts[-1])
    polyline_deviation(pts, [x.position for x in w])


def test_cluster_examples():
    pts = [Waypoint(i, (float(x), 0.0), (0, i)) for i, x in enumerate((0, 10, 20))]
    assert [w.position for w in cluster_waypoints(pts, 0)] == [(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)]
    assert [w.position for w in cluster_waypoints(pts, 12)] == [(5.0, 0.0), (20.0, 0.0)]
    pair = [Waypoint(0, (0.0, 0.0), (0, 1)), Waypoint(1, (1.0, 0.0), (0, 2))]
    assert [w.position for w in cluster_waypoints(pair, 2)] == [(0.5, 0.0)]


def test_cluster_pins_endpoints():
    pts = [Waypoint(0, (0.0, 0.0), "origin"), Waypoint(1, (1.0, 0.0), (0, 1)), Waypoint(2, (2.0, 0.0), "destination")]
    out = cluster_waypoints(pts, 5)
    assert out[0].position == (0.0, 0.0) and out[-1].position == (2.0, 0.0)
    paths = cluster_paths([pts], 5)
    assert paths[0][0] == (0.0, 0.0) and paths[0][-1] == (2.0, 0.0)


def test_build_graph():
    a, b, c, d = (0.0, 0.0), (10.0, 0.0), (20.0, 5.0), (20.0, -5.0)
    g = build_graph([[a, b, c]], 10.0)
    assert len(g.edges) == 2 and g.check_chain(0, a, c)
    g2 = build_graph([[a, b, c], [a, b, d]], 10.0)
    assert len(g2.edges) == 3
    assert g2.sequences[0][0] == g2.sequences[1][0]
    assert all(e[2] == 10.0 for e in g2.edges)
    for p, end in ((0, c), (1, d)):
        assert g2.check_chain(p, a, end)
    with pytest.raises(DegenerateEdge):
        build_graph([[a, a, b]], 10.0)


def test_graph_roundtrip(tmp_path):
    g = build_graph([[(0.0, 0.0), (10.0, 0.0), (20.0, 5.0)], [(0.0, 0.0), (10.0, 0.0), (5.0, 9.0)]], 7.5)
    g.save(tmp_path / "g.json")
    back = HighwayGraph.load(tmp_path / "g.json")
    assert back.waypoints == g.waypoints and back.edges == g.edges and back.sequences == g.sequences


def test_highway_state():
    h = Highway((0, 0), (100, 0), 10)
    p, v = highway_state(h, 0.5)
    assert np.allclose(p, (50, 0)) and np.allclose(v, (10, 0))
    assert np.allclose(highway_state(h, 0)[0], h.start)
    assert np.allclose(highway_state(h, 1)[0], h.end)
    with pytest.raises(SOutOfRange):
        highway_state(h, 1.1)


@given(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)))
def test_direction_unit_and_reversal(a, b):
    if math.hypot(b[0] - a[0], b[1] - a[1]) < 1e-3:
        return
    h = Highway(a, b, 10.0)
    assert abs(np.linalg.norm(h.direction) - 1) <= 1e-12
    assert np.allclose(h.reversed().direction, -h.direction, atol=1e-15)
