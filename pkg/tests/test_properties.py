"""Cross-module invariants as hypothesis properties."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from quenchxy import kernels
from quenchxy.cli import config_hash, format_config, parse_config
from quenchxy.disorder import sample_percolation
from quenchxy.dual_height import potential_V
from quenchxy.graphs import DualType, build_extended_lattice, build_rect_lattice
from quenchxy.models import sample_gauge, xy_energy
from quenchxy.nishimori import IncreasingPath, sample_increasing_path, shared_edges
from quenchxy.oracle import xy_two_point
from quenchxy.rng import stream
from quenchxy.sampler import ChainSchedule, XYChain, XYModel, estimate

seeds = st.integers(0, 2**32)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 5), k=st.integers(1, 6), seed=seeds)
def test_paths_reach_target_in_dk_steps(d, k, seed):
    p = sample_increasing_path(d, k, stream(seed, "prop"))
    assert p.end == (k,) * d
    assert len(p.steps) == d * k
    assert len(p.edges()) == d * k


@settings(max_examples=40, deadline=None)
@given(d=st.integers(2, 4), k=st.integers(1, 5), seed=seeds)
def test_intersections_symmetric_and_bounded(d, k, seed):
    gen = stream(seed, "prop")
    a = np.array([sample_increasing_path(d, k, gen).steps for _ in range(8)])
    b = np.array([sample_increasing_path(d, k, gen).steps for _ in range(8)])
    ab, ba, aa = shared_edges(a, b, d, k), shared_edges(b, a, d, k), shared_edges(a, a, d, k)
    assert np.array_equal(ab, ba)
    assert np.all((0 <= ab) & (ab <= d * k))
    assert np.all(aa == d * k)
    for i in range(8):
        pa = IncreasingPath(d, tuple(a[i].tolist()))
        pb = IncreasingPath(d, tuple(b[i].tolist()))
        assert ab[i] == len(pa.edges() & pb.edges())


@settings(max_examples=40, deadline=None)
@given(
    t=st.sampled_from([DualType.TYPE1, DualType.TYPE2]),
    n=st.integers(1, 12),
    b1=st.floats(0.02, 40.0),
    b2=st.floats(0.02, 40.0),
    k=st.integers(1, 29),
)
def test_dual_potential_even_and_convex(t, n, b1, b2, k):
    V = [potential_V(t, n, b1, b2, j) for j in (k - 1, k, k + 1)]
    assert potential_V(t, n, b1, b2, -k) == V[1]
    assert V[0] + V[2] - 2 * V[1] >= -1e-10


@settings(max_examples=25, deadline=None)
@given(
    beta=st.floats(0.0, 5.0),
    seed=st.integers(0, 10**9),
    workers=st.integers(1, 8),
    grid=st.integers(16, 256),
)
def test_config_round_trip_and_hash(beta, seed, workers, grid):
    text = f"[run]\nexperiment = TwoPoint\nseed = {seed}\nworkers = {workers}\n[model]\nbeta = {beta!r}\n[quadrature]\ngrid = {grid}\n"
    cfg = parse_config(text)
    again = parse_config(format_config(cfg))
    assert again == cfg
    one = parse_config(text, {"run.workers": "1"})
    assert config_hash(one) == config_hash(cfg)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(2, 400), rho=st.floats(-0.9, 0.95))
def test_estimate_inflates_error_by_autocorrelation(seed, n, rho):
    gen = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = gen.normal()
    for i in range(1, n):
        x[i] = rho * x[i - 1] + gen.normal()
    res = estimate(x)
    assert res.n_samples == n
    assert res.tau_int >= 0.5
    assert math.isclose(res.mean, float(x.mean()), rel_tol=1e-12, abs_tol=1e-12)
    naive = float(x.std()) / math.sqrt(n)
    assert res.stderr >= naive * (1 - 1e-12)
    assert math.isclose(res.stderr, naive * math.sqrt(2 * res.tau_int), rel_tol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, p=st.floats(0.0, 1.0), n=st.integers(0, 3))
def test_percolation_shapes_and_forced_sites(seed, p, n):
    g = build_extended_lattice(2, 1, n, 1.0, 1.0)
    s = sample_percolation(g, "site", p, seed)
    assert s.occupation.shape == (g.n_vertices,)
    assert np.all(s.occupation[~g.lattice_mask] == 1)
    b = sample_percolation(g, "edge", p, seed)
    assert b.occupation.shape == (g.n_edges,)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, beta=st.floats(0.1, 3.0))
def test_gauge_phases_stored_reduced(seed, beta):
    g = build_rect_lattice((3, 3), 1.0)
    gd = sample_gauge(g, beta, beta, seed)
    assert np.all((0 <= gd.omega) & (gd.omega < 2 * np.pi))
    for e in range(g.n_edges):
        u, v = int(g.eu[e]), int(g.ev[e])
        s = gd.directed(g, u, v) + gd.directed(g, v, u)
        assert min(s % (2 * np.pi), 2 * np.pi - s % (2 * np.pi)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), beta=st.floats(0.0, 3.0))
def test_chain_angles_stay_reduced(seed, beta):
    g = build_rect_lattice((3, 3), beta)
    chain = XYChain(XYModel(g), ChainSchedule(5, 5, 1, seed=seed))
    chain.thermalize()
    assert np.all((0 <= chain.theta) & (chain.theta < 2 * np.pi))
    # the energy of a reduced state equals that of any lift by 2 pi
    lifted = chain.theta + 2 * np.pi * np.random.default_rng(seed).integers(-3, 4, g.n_vertices)
    assert abs(xy_energy(g, chain.theta) - xy_energy(g, lifted)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=seeds, rows=st.integers(1, 3), cols=st.integers(2, 3))
def test_two_point_nonnegative_and_bounded(seed, rows, cols):
    g = build_rect_lattice((rows, cols), 1.0)
    g = g.with_couplings(np.random.default_rng(seed).uniform(0, 2, g.n_edges))
    for y in range(1, g.n_vertices):
        v = xy_two_point(g, 0, y)
        assert -1e-12 <= v <= 1 + 1e-12


PY = kernels.get_backend("python")
C = kernels.get_backend("compiled")


@settings(max_examples=20, deadline=None)
@given(seed=seeds, rows=st.integers(1, 5), cols=st.integers(2, 5))
def test_kernel_backends_agree_on_random_graphs(seed, rows, cols):
    g = build_rect_lattice((rows, cols), 1.0)
    gen = np.random.default_rng(seed)
    indptr, indices, eid, sign = g.csr
    J = gen.uniform(0, 2, g.n_edges)
    weight = np.ascontiguousarray(J[eid])
    phase = np.ascontiguousarray(sign * gen.uniform(0, 2 * np.pi, g.n_edges)[eid])
    order = gen.permutation(g.n_vertices).astype(np.int64)
    a = gen.uniform(0, 2 * np.pi, g.n_vertices)
    b = a.copy()
    ga, gb = stream(seed, "twin"), stream(seed, "twin")
    for _ in range(5):
        C.heatbath_sweep(indptr, indices, weight, phase, a, order, ga)
        PY.heatbath_sweep(indptr, indices, weight, phase, b, order, gb)
        assert C.cluster_update(indptr, indices, weight, a, ga) == PY.cluster_update(indptr, indices, weight, b, gb)
    assert np.allclose(a, b, rtol=0, atol=1e-9)
