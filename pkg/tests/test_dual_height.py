import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenchxy.dual_height import (
    K_MAX,
    DualPotential,
    HeightState,
    delocalization_experiment,
    height_domain,
    lammers_check,
    potential_V,
    potential_difference_ratio_form,
    potential_table,
    single_face_law,
    threshold_beta1,
    threshold_beta2,
    threshold_by_bisection,
)
from quenchxy.errors import DomainError, PrecisionError
from quenchxy.graphs import DualType
from quenchxy.oracle import bessel_I, bessel_ratio, bessel_ratio_quadrature
from quenchxy.rng import stream
from quenchxy.sampler import ChainSchedule, height_sweep

T1, T2 = DualType.TYPE1, DualType.TYPE2
LN2 = math.log(2)

# frozen from an independent bisection on trapezoid-rule Bessel ratios
BETA1_STAR = 3.15794056
BETA2_STAR = {2: 1.31690433, 4: 3.27141510}


def test_v0_collapse():
    for n, b in ((1, 0.4), (3, 1.7), (8, 5.0)):
        assert potential_V(T1, n, b, b, 0) == pytest.approx(-(n + 1) * math.log(bessel_I(0, 2 * b)), rel=1e-13)
        assert potential_V(T2, n, b, b, 0) == pytest.approx(-(2 * n + 2) * math.log(bessel_I(0, 2 * b)), rel=1e-13)


def test_v_symmetric():
    for t, k in itertools.product((T1, T2), range(0, 31, 3)):
        assert potential_V(t, 3, 0.8, 2.2, k) == potential_V(t, 3, 0.8, 2.2, -k)


def test_type2_step_against_quadrature_ratios():
    step = potential_V(T2, 2, 3.0, 3.0, 1) - potential_V(T2, 2, 3.0, 3.0, 0)
    ref = 4 * math.log(1 / bessel_ratio_quadrature(6.0)) + 2 * math.log(1 / bessel_ratio_quadrature(6.0))
    assert step == pytest.approx(ref, abs=1e-10)


def test_potential_domain():
    with pytest.raises(DomainError):
        potential_V(T1, 2, 0.0, 1.0, 1)
    with pytest.raises(DomainError):
        potential_V(T1, 2, 1.0, 51.0, 1)
    with pytest.raises(DomainError):
        potential_V(T1, 2, 1.0, 1.0, K_MAX + 1)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
@pytest.mark.parametrize("b1,b2", [(0.05, 0.05), (0.5, 3.0), (1.0, 1.0), (3.2, 1.4), (10.0, 50.0), (50.0, 0.2)])
def test_convexity_grid(n, b1, b2):
    for t in (T1, T2):
        pot = DualPotential.build(t, n, b1, b2, kmax=30)
        assert pot.convexity_margin() >= -1e-10


@settings(max_examples=60, deadline=None)
@given(
    t=st.sampled_from([T1, T2]),
    n=st.integers(1, 20),
    b1=st.floats(0.01, 50.0),
    b2=st.floats(0.01, 50.0),
    k=st.integers(-30, 30),
)
def test_difference_two_routes(t, n, b1, b2, k):
    direct = potential_V(t, n, b1, b2, k) - potential_V(t, n, b1, b2, 0)
    ratio = potential_difference_ratio_form(t, n, b1, b2, k)
    assert abs(direct - ratio) <= 1e-10 * max(1.0, abs(direct))


def test_potential_table_rows():
    tab = potential_table(3, 1.0, 2.0)
    assert tab.shape == (2, K_MAX + 1)
    assert np.all(tab[:, 0] == 0)
    assert tab[1, 5] == pytest.approx(potential_V(T2, 3, 1.0, 2.0, 5) - potential_V(T2, 3, 1.0, 2.0, 0))


# ----------------------------------------------------------------- Lammers


def test_lammers_limits():
    r = lammers_check(3, 1e-3, 1e-3)
    assert not r.type1_ok and not r.type2_ok
    r = lammers_check(3, 50.0, 50.0)
    assert r.type1_ok and r.type2_ok


def test_lammers_above_thresholds():
    n = 4
    r = lammers_check(n, threshold_beta1() + 0.1, threshold_beta2(n) + 0.1)
    assert r.surrogate_ok
    assert r.type1_ok and r.type1_margin > 0
    assert r.surrogate_type1_bound == pytest.approx(LN2 / 4 + 0.25)
    assert r.surrogate_type2_bound == pytest.approx(LN2 / 2 + 0.5)
    assert r.type2_discrepancy
    step2 = potential_V(T2, n, threshold_beta1() + 0.1, threshold_beta2(n) + 0.1, 1) - potential_V(
        T2, n, threshold_beta1() + 0.1, threshold_beta2(n) + 0.1, 0
    )
    assert r.type2_margin == pytest.approx(LN2 - step2, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 8, 16])
def test_type1_margin_positive_strictly_above(n):
    for eps in (1e-3, 0.1, 1.0):
        assert lammers_check(n, threshold_beta1() + eps, threshold_beta2(n) + eps).type1_margin > 0


# --------------------------------------------------------------- thresholds


def test_threshold_roots():
    b1 = threshold_beta1()
    assert abs(1 / bessel_ratio(2 * b1) - 2**0.125) < 1e-8
    for n in (2, 4, 8, 16):
        b2 = threshold_beta2(n)
        assert abs(1 / bessel_ratio(2 * b2) - math.exp(1 / (4 * (n - 1)))) < 1e-8


def test_threshold_frozen_values():
    assert threshold_beta1() == pytest.approx(BETA1_STAR, abs=1e-8)
    for n, v in BETA2_STAR.items():
        assert threshold_beta2(n) == pytest.approx(v, abs=1e-8)


def test_threshold_quadrature_bisection():
    alt = threshold_by_bisection(2**0.125, bessel_ratio_quadrature)
    assert alt == pytest.approx(threshold_beta1(), abs=1e-8)
    alt = threshold_by_bisection(math.exp(1 / 12), bessel_ratio_quadrature)
    assert alt == pytest.approx(threshold_beta2(4), abs=1e-8)


def test_threshold_beta2_increasing():
    vals = [threshold_beta2(n) for n in (2, 4, 8, 16, 32)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        threshold_beta2(1)


# ------------------------------------------------------------ height sweep


def test_height_state_pins_boundary():
    HeightState(np.array([0, 2, 0]), np.array([1]))
    with pytest.raises(ValueError):
        HeightState(np.array([1, 2, 0]), np.array([1]))


def neighbour_types(dual, face):
    indptr, indices, etype = dual.csr
    sl = slice(indptr[face], indptr[face + 1])
    return indices[sl].tolist(), [DualType(int(t)) for t in etype[sl].tolist()]


def test_single_face_law_by_direct_sum():
    n, b1, b2 = 2, 0.8, 0.6
    dom = height_domain(n, 0)
    root = dom.dual.root
    _, types = neighbour_types(dom.dual, root)
    ks = np.arange(-20, 21)
    e = np.array([sum(potential_V(t, n, b1, b2, k) for t in types) for k in ks])
    w = np.exp(-(e - e.min()))
    assert single_face_law(n, b1, b2, types) == pytest.approx(w / w.sum(), abs=1e-14)


def test_height_sweep_single_face():
    n, b1, b2 = 2, 0.8, 0.6
    dom = height_domain(n, 0)
    dual, root = dom.dual, dom.dual.root
    assert dom.free.tolist() == [root]
    _, types = neighbour_types(dual, root)
    law = single_face_law(n, b1, b2, types)
    h = np.zeros(dual.n_faces, dtype=np.int64)
    gen = stream(4, "face")
    pot = potential_table(n, b1, b2)
    draws = 100_000
    counts = np.zeros(41)
    for _ in range(draws):
        h = height_sweep(dual, h, pot, gen, free=dom.free)
        counts[h[root] + 20] += 1
    emp = counts / draws
    # fresh independent draw each sweep since the neighbours are pinned
    assert np.all(np.abs(emp - law) <= 4 * np.sqrt(law * (1 - law) / draws) + 1e-12)


def test_height_sweep_localized_limit():
    dom = height_domain(2, 2)
    pot = potential_table(2, 1e-3, 1e-3)
    h = np.zeros(dom.dual.n_faces, dtype=np.int64)
    gen = stream(5, "steep")
    for _ in range(2000):
        h = height_sweep(dom.dual, h, pot, gen, free=dom.free)
        assert not h.any()


def test_height_sweep_two_faces_enumeration():
    n, b1, b2 = 2, 1.0, 1.0
    dom = height_domain(n, 1)
    dual, root = dom.dual, dom.dual.root
    nbrs, types = neighbour_types(dual, root)
    other = nbrs[0]
    free = np.array([root, other])
    pot = potential_table(n, b1, b2)

    def face_energy(f, hf, hg):
        """Sum over dual edges at f; the edge to the other free face uses the difference."""
        ids, ts = neighbour_types(dual, f)
        tot = 0.0
        for v, t in zip(ids, ts):
            partner = hg if v in (root, other) else 0
            tot += pot[int(t.value) - 1, abs(hf - partner)]
        return tot

    ks = range(-10, 11)
    w = np.zeros((21, 21))
    t_shared = [t for v, t in zip(nbrs, types) if v == other][0]
    for a, b in itertools.product(ks, ks):
        e = face_energy(root, a, b) + face_energy(other, b, a) - pot[int(t_shared.value) - 1, abs(a - b)]
        w[a + 10, b + 10] = math.exp(-e)
    law = w / w.sum()
    h = np.zeros(dual.n_faces, dtype=np.int64)
    gen = stream(6, "two-face")
    draws = 200_000
    counts = np.zeros((21, 21))
    for i in range(draws + 200):
        h = height_sweep(dual, h, pot, gen, free=free)
        if i >= 200:
            counts[h[root] + 10, h[other] + 10] += 1
    emp = counts / draws
    assert 0.5 * np.abs(emp - law).sum() < 0.01
    big = law > 1e-3
    # allow for the mild correlation between successive sweeps
    assert np.all(np.abs(emp - law)[big] <= 6 * np.sqrt(law * (1 - law) / draws)[big])


def test_height_sweep_window_error():
    dom = height_domain(2, 0)
    flat = np.zeros((2, 10))
    with pytest.raises(PrecisionError):
        height_sweep(dom.dual, np.zeros(dom.dual.n_faces, dtype=np.int64), flat, stream(0), free=dom.free)


# -------------------------------------------------------- delocalization


def test_height_domain_nested():
    a, b = height_domain(2, 1), height_domain(2, 3)
    assert a.free.size < b.free.size
    assert a.free.size == 4
    with pytest.raises(DomainError):
        height_domain(2, -1)


def test_delocalization_smallest_domain():
    n, b1, b2 = 2, 0.8, 0.6
    res = delocalization_experiment(n, b1, b2, [0], ChainSchedule(100, 40_000, 1, 7))
    dom = height_domain(n, 0)
    _, types = neighbour_types(dom.dual, dom.dual.root)
    law = single_face_law(n, b1, b2, types)
    expect = float(np.abs(np.arange(-20, 21)) @ law)
    est = res.rows[0].estimate
    assert abs(est.mean - expect) <= 3 * est.stderr
    assert res.exploratory


def test_delocalization_localized_no_growth():
    n, b1, b2 = 2, 0.05, 0.05
    res = delocalization_experiment(n, b1, b2, [0, 2, 4], ChainSchedule(100, 5000, 1, 8))
    dom = height_domain(n, 0)
    _, types = neighbour_types(dom.dual, dom.dual.root)
    law = single_face_law(n, b1, b2, types)
    expect = float(np.abs(np.arange(-20, 21)) @ law)
    for row in res.rows:
        assert abs(row.estimate.mean - expect) <= 3 * row.estimate.stderr + 1e-12


def test_delocalization_passing_parameters_monotone():
    n = 2
    b1, b2 = threshold_beta1() + 0.1, threshold_beta2(n) + 0.1
    res = delocalization_experiment(n, b1, b2, [0, 2, 4, 6], ChainSchedule(200, 3000, 1, 9))
    assert res.lammers.type1_ok
    assert res.monotone
    assert res.rows[-1].estimate.mean > res.rows[0].estimate.mean
