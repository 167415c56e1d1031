import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from quenchxy.disorder import PercolationKind, PercolationSample
from quenchxy.errors import DomainError
from quenchxy.graphs import EdgeClass, build_extended_lattice, build_rect_lattice
from quenchxy.models import (
    GaugeDisorder,
    Phi4State,
    SingleSiteMeasure,
    lambda_expansion,
    lambda_n,
    local_field,
    phi4_energy,
    sample_gauge,
    xy_energy,
)
from quenchxy.oracle import bessel_I_quadrature

angles = st.floats(-20.0, 20.0, allow_nan=False)


def random_box(seed, shape=(3, 3)):
    gen = np.random.default_rng(seed)
    g = build_rect_lattice(shape, 1.0).with_couplings(gen.uniform(0.1, 3.0, build_rect_lattice(shape, 1.0).n_edges))
    return g, gen


def test_constant_spins_energy():
    g, gen = random_box(0)
    assert xy_energy(g, np.full(9, 1.3)) == pytest.approx(-g.coupling.sum(), abs=1e-13)
    occ = gen.integers(0, 2, 9).astype(np.uint8)
    s = PercolationSample(PercolationKind.SITE, occ, 0.5, 0, g)
    expect = -np.sum(g.coupling * occ[g.eu] * occ[g.ev])
    assert xy_energy(g, np.full(9, 0.4), disorder=s) == pytest.approx(expect, abs=1e-13)


def test_one_edge_opposite_spins():
    g = build_rect_lattice((1, 2), 2.5)
    assert xy_energy(g, [0.0, math.pi]) == pytest.approx(2.5, abs=1e-15)


def test_energy_matches_high_precision_sum():
    g, gen = random_box(1)
    th = gen.uniform(0, 2 * math.pi, 9)
    om = gen.uniform(0, 2 * math.pi, g.n_edges)
    mpmath.mp.dps = 40
    ref = mpmath.fsum(
        -mpmath.mpf(float(J)) * mpmath.cos(mpmath.mpf(float(th[u])) - mpmath.mpf(float(th[v])) - mpmath.mpf(float(w)))
        for J, u, v, w in zip(g.coupling, g.eu, g.ev, om)
    )
    assert abs(xy_energy(g, th, gauge=GaugeDisorder(om)) - float(ref)) < 1e-13


def test_energy_shape_mismatch():
    g, _ = random_box(2)
    with pytest.raises(ValueError):
        xy_energy(g, np.zeros(8))


def test_local_field_examples():
    g = build_rect_lattice((1, 1), 1.0)
    assert local_field(g, [0.3], 0)[0] == 0.0
    g = build_rect_lattice((1, 2), 1.7)
    mag, direction = local_field(g, [0.0, 2.2], 0)
    assert mag == pytest.approx(1.7) and direction == pytest.approx(2.2)


def test_local_field_complex_sum():
    g, gen = random_box(3)
    th = gen.uniform(0, 2 * math.pi, 9)
    om = gen.uniform(0, 2 * math.pi, g.n_edges)
    gauge = GaugeDisorder(om)
    x = g.vertex_id((1, 1))
    z = 0j
    for y in g.neighbours(x).tolist():
        e = g.edge_index[(x, y)]
        z += g.coupling[e] * np.exp(1j * (th[y] + gauge.directed(g, x, y)))
    mag, direction = local_field(g, th, x, gauge=gauge)
    assert abs(mag - abs(z)) < 1e-14
    assert abs(mag * np.exp(1j * direction) - z) < 1e-13


def test_local_field_is_conditional_law():
    # E(theta_x) - E(theta_x = direction) = mag (1 - cos(theta_x - direction))
    g, gen = random_box(4)
    th = gen.uniform(0, 2 * math.pi, 9)
    gauge = GaugeDisorder(gen.uniform(0, 2 * math.pi, g.n_edges))
    x = g.vertex_id((1, 1))
    mag, direction = local_field(g, th, x, gauge=gauge)
    base = th.copy()
    base[x] = direction
    e0 = xy_energy(g, base, gauge=gauge)
    for t in np.linspace(0, 2 * math.pi, 7):
        th2 = th.copy()
        th2[x] = t
        assert xy_energy(g, th2, gauge=gauge) - e0 == pytest.approx(mag * (1 - math.cos(t - direction)), abs=1e-12)


def test_phi4_energy_examples():
    g = build_rect_lattice((1, 1), 1.0)
    st_ = Phi4State([1.0], [0.0])
    assert phi4_energy(g, st_, 0.0, 0.7, -0.2) == pytest.approx(0.5)
    g = build_rect_lattice((2, 2), 1.0)
    gen = np.random.default_rng(0)
    R = gen.uniform(0.2, 2.0, 4)
    th = gen.uniform(0, 6, 4)
    s = Phi4State(R, th)
    delta = 0.37
    shift = phi4_energy(g, s, 1.3, 1.0, 0.5 + delta) - phi4_energy(g, s, 1.3, 1.0, 0.5)
    assert shift == pytest.approx(delta * np.sum(R**2), abs=1e-12)
    ref = sum(Fraction(-1.3) * Fraction(float(R[u] * R[v] * math.cos(th[u] - th[v]))) for u, v in zip(g.eu, g.ev))
    ref += sum(Fraction(float(r**4)) + Fraction(0.5) * Fraction(float(r**2)) - Fraction(math.log(r)) for r in R)
    assert phi4_energy(g, s, 1.3, 1.0, 0.5) == pytest.approx(float(ref), abs=1e-12)


def test_phi4_energy_zero_radius_and_domain():
    g = build_rect_lattice((1, 2), 1.0)
    assert phi4_energy(g, Phi4State([0.0, 1.0], [0, 0]), 1.0, 1.0, 0.0) == math.inf
    with pytest.raises(DomainError):
        phi4_energy(g, Phi4State([1.0, 1.0], [0, 0]), 1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        Phi4State([-1.0, 1.0], [0, 0])


def test_single_site_measure_validation():
    with pytest.raises(DomainError):
        SingleSiteMeasure.dirac(-0.1)
    with pytest.raises(DomainError):
        SingleSiteMeasure.bernoulli(1.2)
    with pytest.raises(DomainError):
        SingleSiteMeasure.phi4(0.0, 1.0)
    assert SingleSiteMeasure.bernoulli(0.0).is_delta_zero()
    assert not SingleSiteMeasure.dirac(0.5).is_delta_zero()


def test_gauge_antisymmetry():
    g, gen = random_box(5)
    gauge = GaugeDisorder(gen.uniform(-10, 10, g.n_edges))
    for u, v in zip(g.eu.tolist(), g.ev.tolist()):
        s = gauge.directed(g, u, v) + gauge.directed(g, v, u)
        assert min(s % (2 * math.pi), 2 * math.pi - s % (2 * math.pi)) < 1e-12
    assert np.all((gauge.omega >= 0) & (gauge.omega < 2 * math.pi))


def test_sample_gauge_means():
    g = build_rect_lattice((100, 101), 1.0)  # 20 000 edges
    n = g.n_edges
    w = sample_gauge(g, 0.0, 0.0, 1).omega
    assert abs(np.cos(w).mean()) < 4 * math.sqrt(0.5 / n)
    w = sample_gauge(g, 2.0, 2.0, 2).omega
    ref = bessel_I_quadrature(1, 2.0) / bessel_I_quadrature(0, 2.0)
    var = 0.5 * (1 + bessel_I_quadrature(2, 2.0) / bessel_I_quadrature(0, 2.0)) - ref**2
    assert abs(np.cos(w).mean() - ref) < 4 * math.sqrt(var / n)
    w = sample_gauge(g, 2000.0, 2000.0, 3).omega
    assert np.cos(w).mean() > 0.999


def test_sample_gauge_uses_edge_class():
    g = build_extended_lattice(2, 8, 2, 50.0, 0.5)
    w = sample_gauge(g, 50.0, 0.5, 4).omega
    c = np.cos(w)
    b1 = g.edge_class == EdgeClass.BETA1
    assert c[b1].mean() > 0.98
    assert abs(c[~b1].mean() - bessel_I_quadrature(1, 0.5) / bessel_I_quadrature(0, 0.5)) < 0.05


def test_lambda_n_examples():
    assert lambda_n(1e4, 1e4, 3) == pytest.approx(1.0, abs=2e-4)
    r = bessel_I_quadrature(1, 1.5) / bessel_I_quadrature(0, 1.5)
    assert lambda_n(1.5, 7.0, 1) == pytest.approx(r**2, rel=1e-10)
    assert lambda_n(1e-8, 1.0, 1) < 1e-15
    with pytest.raises(DomainError):
        lambda_n(0.0, 1.0, 2)
    with pytest.raises(DomainError):
        lambda_n(1.0, 1.0, 0)


def test_lambda_2_by_double_quadrature():
    # E[cos w1 cos w2]^... computed as a 2-D integral over two independent phases
    def dens(w, b):
        return math.exp(b * math.cos(w))

    z = integrate.quad(dens, -math.pi, math.pi, args=(10.0,), epsabs=0, epsrel=1e-13)[0]
    pair = integrate.dblquad(
        lambda a, b: math.cos(a) * math.cos(b) * dens(a, 10.0) * dens(b, 10.0),
        -math.pi, math.pi, -math.pi, math.pi, epsabs=0, epsrel=1e-12,
    )[0] / z**2
    single = integrate.quad(lambda w: math.cos(w) * dens(w, 10.0), -math.pi, math.pi, epsabs=0, epsrel=1e-13)[0] / z
    # lambda_2(b, b) = E[cos]^2 * E[cos]
    assert lambda_n(10.0, 10.0, 2) == pytest.approx(pair * single, abs=1e-8)


@pytest.mark.parametrize("n", [2, 5])
def test_lambda_expansion_remainder_bounded(n):
    rem = [b**2 * abs(lambda_n(b, b, n) - lambda_expansion(b, b, n)) for b in (20.0, 40.0, 80.0)]
    for a, b in zip(rem, rem[1:]):
        assert 0.2 <= b / a <= 5


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), c=angles)
def test_rotation_invariance(seed, c):
    g, gen = random_box(seed % 1000)
    th = gen.uniform(0, 2 * math.pi, 9)
    assert abs(xy_energy(g, th + c) - xy_energy(g, th)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_gauge_covariance(seed):
    g, gen = random_box(seed % 1000, (2, 3))
    th = gen.uniform(0, 2 * math.pi, g.n_vertices)
    om = gen.uniform(0, 2 * math.pi, g.n_edges)
    alpha = gen.uniform(-math.pi, math.pi, g.n_vertices)
    moved = om + alpha[g.eu] - alpha[g.ev]
    e0 = xy_energy(g, th, gauge=GaugeDisorder(om))
    assert abs(xy_energy(g, th + alpha, gauge=GaugeDisorder(moved)) - e0) < 1e-12


def test_gauge_covariance_with_stated_sign_fails():
    # the opposite shift omega + alpha_y - alpha_x does not preserve the energy
    g, gen = random_box(7, (2, 3))
    th = gen.uniform(0, 2 * math.pi, g.n_vertices)
    om = gen.uniform(0, 2 * math.pi, g.n_edges)
    alpha = gen.uniform(-math.pi, math.pi, g.n_vertices)
    other = om + alpha[g.ev] - alpha[g.eu]
    e0 = xy_energy(g, th, gauge=GaugeDisorder(om))
    assert abs(xy_energy(g, th + alpha, gauge=GaugeDisorder(other)) - e0) > 1e-3
