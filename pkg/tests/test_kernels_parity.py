"""The compiled kernels and their pure-Python twins must walk identical chains."""

import numpy as np
import pytest

from quenchxy import kernels
from quenchxy.dual_height import height_domain, potential_table
from quenchxy.graphs import build_box_lattice, build_rect_lattice
from quenchxy.rng import stream

PY = kernels.get_backend("python")
C = kernels.get_backend("compiled")

needs_compiled = pytest.mark.skipif(C is PY, reason="compiled extension not built")


def slots(graph, seed=0, phases=False):
    indptr, indices, eid, sign = graph.csr
    gen = np.random.default_rng(seed)
    J = gen.uniform(0.2, 2.0, graph.n_edges)
    weight = np.ascontiguousarray(J[eid])
    omega = gen.uniform(0, 2 * np.pi, graph.n_edges) if phases else np.zeros(graph.n_edges)
    phase = np.ascontiguousarray(sign * omega[eid])
    return indptr, indices, weight, phase, J


def twin_gens(seed):
    return stream(seed, "parity"), stream(seed, "parity")


def test_backend_selection():
    assert kernels.get_backend("python") is PY
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert kernels.BACKEND in ("compiled", "python")


def test_environment_forces_python(monkeypatch):
    monkeypatch.setenv("QUENCHXY_BACKEND", "python")
    assert kernels.get_backend() is PY


@needs_compiled
@pytest.mark.parametrize("phases", [False, True])
def test_heatbath(phases):
    g = build_rect_lattice((4, 5), 1.0)
    indptr, indices, weight, phase, _ = slots(g, 1, phases)
    order = np.arange(g.n_vertices, dtype=np.int64)[::-1].copy()
    t0 = np.random.default_rng(2).uniform(0, 2 * np.pi, g.n_vertices)
    a, b = t0.copy(), t0.copy()
    ga, gb = twin_gens(3)
    for _ in range(30):
        C.heatbath_sweep(indptr, indices, weight, phase, a, order, ga)
        PY.heatbath_sweep(indptr, indices, weight, phase, b, order, gb)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)
    assert ga.random() == gb.random()


@needs_compiled
def test_metropolis():
    g = build_rect_lattice((3, 4), 1.0)
    indptr, indices, weight, phase, _ = slots(g, 4, True)
    order = np.arange(g.n_vertices, dtype=np.int64)
    a = np.zeros(g.n_vertices)
    b = a.copy()
    ga, gb = twin_gens(5)
    acc_a = acc_b = 0
    for _ in range(50):
        acc_a += C.metropolis_sweep(indptr, indices, weight, phase, a, order, 1.5, ga)
        acc_b += PY.metropolis_sweep(indptr, indices, weight, phase, b, order, 1.5, gb)
    assert acc_a == acc_b
    assert 0 < acc_a < 50 * g.n_vertices
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


@needs_compiled
def test_cluster():
    g = build_rect_lattice((5, 5), 1.0)
    indptr, indices, weight, _, _ = slots(g, 6)
    a = np.random.default_rng(7).uniform(0, 2 * np.pi, g.n_vertices)
    b = a.copy()
    ga, gb = twin_gens(8)
    sizes = []
    for _ in range(100):
        sa = C.cluster_update(indptr, indices, weight, a, ga)
        sb = PY.cluster_update(indptr, indices, weight, b, gb)
        assert sa == sb
        sizes.append(sa)
    assert max(sizes) > 1
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)


@needs_compiled
def test_union_find_and_fk():
    g = build_rect_lattice((6, 6), 1.0)
    gen = np.random.default_rng(9)
    open_edge = (gen.random(g.n_edges) < 0.5).astype(np.uint8)
    la = C.union_find_labels(g.n_vertices, g.eu, g.ev, open_edge)
    lb = PY.union_find_labels(g.n_vertices, g.eu, g.ev, open_edge)
    np.testing.assert_array_equal(la, lb)
    assert np.all(la <= np.arange(g.n_vertices))
    theta = gen.uniform(0, 2 * np.pi, g.n_vertices)
    J = gen.uniform(0.5, 2, g.n_edges)
    ga, gb = twin_gens(10)
    for _ in range(20):
        phi = float(ga.random())
        assert phi == gb.random()
        np.testing.assert_array_equal(
            C.fk_labels(g.n_vertices, g.eu, g.ev, J, theta, phi, ga),
            PY.fk_labels(g.n_vertices, g.eu, g.ev, J, theta, phi, gb),
        )


@needs_compiled
@pytest.mark.parametrize("d,side,p", [(2, 8, 0.7), (2, 10, 0.55), (3, 5, 0.4)])
def test_pregood(d, side, p):
    gen = np.random.default_rng(side)
    shape = np.full(d, side + 3, dtype=np.int64)
    for _ in range(30):
        occ = (gen.random(int(np.prod(shape))) < p).astype(np.uint8)
        lo = gen.integers(0, 4, d).astype(np.int64)
        for div in (1, 2, 4):
            assert C.pregood_box(occ, shape, lo, side, div) == PY.pregood_box(occ, shape, lo, side, div)


@needs_compiled
@pytest.mark.parametrize("beta1,beta2", [(1.0, 1.0), (4.0, 2.0)])
def test_height(beta1, beta2):
    dom = height_domain(2, 2, beta1, beta2)
    indptr, indices, etype = dom.dual.csr
    table = np.zeros((3, potential_table(2, beta1, beta2).shape[1]))
    table[1:] = potential_table(2, beta1, beta2)
    a = np.zeros(dom.dual.n_faces, dtype=np.int64)
    b = a.copy()
    ga, gb = twin_gens(11)
    for _ in range(40):
        sa = C.height_sweep(indptr, indices, etype, a, dom.free, table, 6, ga)
        sb = PY.height_sweep(indptr, indices, etype, b, dom.free, table, 6, gb)
        assert sa == sb == 0
    np.testing.assert_array_equal(a, b)
    assert np.any(a != 0)


@needs_compiled
def test_height_status_codes():
    dom = height_domain(2, 1)
    indptr, indices, etype = dom.dual.csr
    flat = np.zeros((3, 4))
    h = np.zeros(dom.dual.n_faces, dtype=np.int64)
    for backend in (C, PY):
        # a flat table never loses mass at the window edge
        assert backend.height_sweep(indptr, indices, etype, h.copy(), dom.free, flat, 1, stream(0, "s")) == 2
        far = h.copy()
        far[indices[indptr[dom.free[0]]]] = 50
        steep = np.tile(np.arange(4.0) ** 2 * 10, (3, 1))
        assert backend.height_sweep(indptr, indices, etype, far, dom.free, steep, 1, stream(0, "s")) == 1


@needs_compiled
def test_phi4():
    g = build_box_lattice(2, 2, 0.7)
    indptr, indices, eid, _ = g.csr
    weight = np.ascontiguousarray(g.coupling[eid])
    gen = np.random.default_rng(12)
    ra = gen.uniform(0.5, 1.5, g.n_vertices)
    ta = gen.uniform(0, 2 * np.pi, g.n_vertices)
    rb, tb = ra.copy(), ta.copy()
    ga, gb = twin_gens(13)
    acc = 0
    for _ in range(50):
        a = C.phi4_sweep(indptr, indices, weight, ra, ta, 0.7, 1.0, -1.0, 0.5, ga)
        b = PY.phi4_sweep(indptr, indices, weight, rb, tb, 0.7, 1.0, -1.0, 0.5, gb)
        assert a == b
        acc += a
    assert 0 < acc < 50 * g.n_vertices
    np.testing.assert_allclose(ra, rb, rtol=1e-12)
    np.testing.assert_allclose(ta, tb, rtol=0, atol=1e-9)
