import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import cKDTree

from quenchxy.errors import CoverageError, DegenerateInputError
from quenchxy.voronoi import (
    Window,
    bisector_facets,
    build_voronoi_graph,
    check_voronoi_events,
    covering_radius,
    default_f,
    polygon_area,
    probe_events,
    sample_poisson_points,
)

from voronoi_cases import instances, triangular

UNIT = Window(0.0, 0.0, 1.0, 1.0)


def oracle_edges(points, window):
    w = Window.of(window)
    facets = bisector_facets(points, w)
    tol = 1e-12 * w.diagonal
    return {k for k, (a, b) in facets.items() if np.linalg.norm(b - a) > tol}


def probe_grid_pairs(points, window, pitch):
    """Owner pairs of horizontally or vertically adjacent probes, with the midpoint of each crossing."""
    w = Window.of(window)
    xs = np.arange(w.xmin + pitch / 2, w.xmax, pitch)
    ys = np.arange(w.ymin + pitch / 2, w.ymax, pitch)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    _, owner = cKDTree(points).query(np.column_stack([X.ravel(), Y.ravel()]))
    owner = owner.reshape(X.shape)
    pairs = {}
    for sl_a, sl_b in (((slice(1, None), slice(None)), (slice(None, -1), slice(None))),
                       ((slice(None), slice(1, None)), (slice(None), slice(None, -1)))):
        a, b = owner[sl_a], owner[sl_b]
        mx = 0.5 * (X[sl_a] + X[sl_b])
        my = 0.5 * (Y[sl_a] + Y[sl_b])
        m = a != b
        for i, j, x, y in zip(a[m].tolist(), b[m].tolist(), mx[m].tolist(), my[m].tolist()):
            pairs.setdefault((min(i, j), max(i, j)), (x, y))
    return pairs


def test_poisson_empty_and_count():
    assert sample_poisson_points(Window(0, 0, 1e-9, 1e-9), 1).shape == (0, 2)
    pts = sample_poisson_points(Window(0, 0, 100, 100), 4)
    assert abs(pts.shape[0] - 1e4) < 4 * 100
    assert np.all((pts >= 0) & (pts <= 100))


def test_poisson_deterministic():
    a = sample_poisson_points(Window(0, 0, 10, 10), 9, index=3)
    b = sample_poisson_points(Window(0, 0, 10, 10), 9, index=3)
    assert a.tobytes() == b.tobytes()


def test_two_points():
    vg = build_voronoi_graph(np.array([[0.25, 0.5], [0.75, 0.5]]), UNIT)
    assert vg.edges() == {(0, 1)}
    assert vg.adjacency[0][2] == pytest.approx(1.0)
    assert vg.areas == pytest.approx([0.5, 0.5])


def test_three_points():
    vg = build_voronoi_graph(np.array([[0.2, 0.2], [0.8, 0.3], [0.5, 0.8]]), UNIT)
    assert vg.edges() == {(0, 1), (0, 2), (1, 2)}


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        build_voronoi_graph(np.array([[0.5, 0.5]]), UNIT)
    with pytest.raises(DegenerateInputError):
        build_voronoi_graph(np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.1]]), UNIT)


def test_collinear_points():
    pts = np.array([[0.1, 0.5], [0.4, 0.5], [0.7, 0.5], [0.9, 0.5]])
    vg = build_voronoi_graph(pts, UNIT)
    assert vg.edges() == {(0, 1), (1, 2), (2, 3)}
    assert vg.areas.sum() == pytest.approx(1.0, rel=1e-12)


def test_cocircular_square_drops_point_contacts():
    pts = np.array([[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]])
    vg = build_voronoi_graph(pts, UNIT)
    assert vg.edges() == {(0, 1), (1, 2), (2, 3), (0, 3)}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_200_points_adjacency_and_area(seed):
    w = Window(0, 0, 14.0, 14.0)
    gen = np.random.default_rng(seed)
    pts = gen.uniform(0, 14.0, (200, 2))
    vg = build_voronoi_graph(pts, w)
    assert vg.edges() == oracle_edges(pts, w)
    assert abs(vg.areas.sum() - w.area) <= 1e-9 * w.area
    assert all(length > 0 for _, _, length in vg.adjacency)


def test_probe_grid_agrees_with_adjacency():
    w = Window(0, 0, 14.0, 14.0)
    pts = np.random.default_rng(5).uniform(0, 14.0, (200, 2))
    vg = build_voronoi_graph(pts, w)
    pitch = 0.01
    probe = probe_grid_pairs(pts, w, pitch)
    long_facets = {(i, j) for i, j, length in vg.adjacency if length > 4 * pitch}
    # a probe boundary that is not a facet must straddle a third cell thinner than the pitch
    tree = cKDTree(pts)
    for (i, j), mid in probe.items():
        if (i, j) in vg.edges():
            continue
        d, k = tree.query(mid, k=3)
        assert set(k[:2].tolist()) != {i, j} or d[2] - d[0] <= pitch
    assert long_facets <= set(probe)


def test_strength_multipliers():
    pts = np.random.default_rng(2).uniform(0, 5, (30, 2))
    w = Window(0, 0, 5, 5)
    f1 = build_voronoi_graph(pts, w, "F1")
    f2 = build_voronoi_graph(pts, w, "F2")
    f3 = build_voronoi_graph(pts, w, "F3")
    assert np.all(f1.multipliers == 1.0)
    fa = 1.0 - np.exp(-f2.areas)
    assert f2.multipliers == pytest.approx([fa[i] * fa[j] for i, j, _ in f2.adjacency])
    assert f3.multipliers == pytest.approx([length for _, _, length in f3.adjacency])
    g = f3.as_graph(2.0)
    assert g.coupling == pytest.approx(2.0 * f3.multipliers)
    custom = build_voronoi_graph(pts, w, "F2", f=lambda v: np.asarray(v) ** 2)
    assert custom.multipliers == pytest.approx([(custom.areas[i] * custom.areas[j]) ** 2 for i, j, _ in custom.adjacency])


def test_default_f_increasing_and_bounded():
    v = np.linspace(0, 20, 101)
    fv = default_f(v)
    assert np.all(np.diff(fv) > 0) and np.all(fv < 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 40))
def test_voronoi_invariants(seed, n):
    w = Window(-1.0, 0.0, 3.0, 2.0)
    pts = np.random.default_rng(seed).uniform((-1.0, 0.0), (3.0, 2.0), (n, 2))
    vg = build_voronoi_graph(pts, w)
    assert abs(vg.areas.sum() - w.area) <= 1e-9 * w.area
    assert all(i < j and length > 0 for i, j, length in vg.adjacency)
    for i in range(n):
        for j in vg.neighbours(i):
            assert i in vg.neighbours(j)
    assert vg.edges() == oracle_edges(pts, w)
    assert all(polygon_area(c) >= 0 for c in vg.cells)


def test_events_empty_set():
    ev = check_voronoi_events(np.zeros((0, 2)), (0, 0), 1.0, 1.0)
    assert not ev.E_R and ev.K is None and ev.F_RH


def test_events_fine_grid_covers():
    R = 1.0
    spacing = R / (10 * math.sqrt(2)) * 0.99
    ax = np.arange(-6 * R, 6 * R + spacing, spacing)
    X, Y = np.meshgrid(ax, ax)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    ev = check_voronoi_events(pts, (0, 0), R, 1e6)
    assert ev.E_R and ev.K is not None and ev.K > 0


def test_events_coverage_error():
    with pytest.raises(CoverageError):
        check_voronoi_events(np.zeros((3, 2)), (0, 0), 1.0, 1.0, window=Window(-5, -5, 5, 5))


def test_covering_radius_square_corners():
    pts = np.array([[0.5, 0.5]])
    assert covering_radius(pts, UNIT) == pytest.approx(math.sqrt(0.5))
    pts = triangular((0, 0), 1.0, 0.15, 0.0, np.random.default_rng(0))
    r = covering_radius(pts, Window.square((0, 0), 5.0))
    assert r == pytest.approx(0.15 / math.sqrt(3), rel=1e-6)


def test_events_match_probe_oracle_sample():
    for seed, pts, z, R, H in instances(8, start=100):
        a = check_voronoi_events(pts, z, R, H)
        b = probe_events(pts, z, R, H)
        assert (a.E_R, a.F_RH) == (b.E_R, b.F_RH)
        assert (a.K is None) == (b.K is None)
        if a.K is not None:
            assert a.K == pytest.approx(b.K, rel=1e-9)
