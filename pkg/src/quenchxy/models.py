"""Energy functionals and single-site / gauge disorder for the rotator models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .graphs import EdgeClass, WeightedGraph
from .rng import stream

TWO_PI = 2.0 * math.pi


class MeasureKind(Enum):
    DIRAC = "dirac"
    BERNOULLI_MIX = "bernoulli"
    PHI4_RADIAL = "phi4"


@dataclass(frozen=True)
class SingleSiteMeasure:
    """Radial measure attached to a vertex."""

    kind: MeasureKind
    a: float = 0.0
    pbar: float = 0.0
    g: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        if self.kind is MeasureKind.DIRAC and self.a < 0:
            raise DomainError("Dirac mass location must be nonnegative")
        if self.kind is MeasureKind.BERNOULLI_MIX and not 0.0 <= self.pbar <= 1.0:
            raise DomainError("pbar must lie in [0, 1]")
        if self.kind is MeasureKind.PHI4_RADIAL and not self.g > 0:
            raise DomainError("the quartic coefficient g must be positive")

    @classmethod
    def dirac(cls, a: float) -> SingleSiteMeasure:
        return cls(MeasureKind.DIRAC, a=float(a))

    @classmethod
    def bernoulli(cls, pbar: float) -> SingleSiteMeasure:
        return cls(MeasureKind.BERNOULLI_MIX, pbar=float(pbar))

    @classmethod
    def phi4(cls, g: float, h: float) -> SingleSiteMeasure:
        return cls(MeasureKind.PHI4_RADIAL, g=float(g), h=float(h))

    def is_delta_zero(self) -> bool:
        if self.kind is MeasureKind.DIRAC:
            return self.a == 0.0
        if self.kind is MeasureKind.BERNOULLI_MIX:
            return self.pbar == 0.0
        return False

    def radial_log_density(self, r):
        """log of r e^{-g r^4 - h r^2} (Phi4 only, unnormalized)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(r) - self.g * r**4 - self.h * r**2


@dataclass(frozen=True, eq=False)
class GaugeDisorder:
    """Phases on the edges, stored in the orientation u -> v of the graph.

    The reverse direction is read as ``-omega`` so antisymmetry is exact.
    """

    omega: np.ndarray

    def __post_init__(self):
        om = np.mod(np.asarray(self.omega, dtype=float), TWO_PI)
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    def directed(self, graph: WeightedGraph, x: int, y: int) -> float:
        e = graph.edge_index[(x, y)]
        return float(self.omega[e]) if graph.eu[e] == x else float(-self.omega[e] % TWO_PI)


@dataclass
class Phi4State:
    radii: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.angles = np.mod(np.asarray(self.angles, dtype=float), TWO_PI)
        if np.any(self.radii < 0):
            raise DomainError("radii must be nonnegative")


def edge_occupation(graph: WeightedGraph, disorder=None) -> np.ndarray:
    """occ(e): r_u r_v for site disorder, omega_e for edge disorder, 1 otherwise."""
    if disorder is None:
        return np.ones(graph.n_edges)
    occ = np.asarray(disorder.occupation, dtype=float)
    if disorder.kind.value == "site":
        if occ.shape != (graph.n_vertices,):
            raise ValueError("site disorder does not match the graph")
        return occ[graph.eu] * occ[graph.ev]
    if occ.shape != (graph.n_edges,):
        raise ValueError("edge disorder does not match the graph")
    return occ


def effective_couplings(graph: WeightedGraph, disorder=None, couplings=None) -> np.ndarray:
    J = graph.coupling if couplings is None else np.asarray(couplings, dtype=float)
    if J.shape != (graph.n_edges,):
        raise ValueError("coupling vector does not match the graph")
    return J * edge_occupation(graph, disorder)


def _phases(graph: WeightedGraph, gauge: GaugeDisorder | None) -> np.ndarray:
    if gauge is None:
        return np.zeros(graph.n_edges)
    if gauge.omega.shape != (graph.n_edges,):
        raise ValueError("gauge does not match the graph")
    return gauge.omega


def xy_energy(graph: WeightedGraph, spins, disorder=None, gauge=None) -> float:
    """-sum_e J_e occ(e) cos(theta_u - theta_v - omega_uv), compensated summation."""
    theta = np.asarray(spins, dtype=float)
    if theta.shape != (graph.n_vertices,):
        raise ValueError("spin configuration does not match the graph")
    J = effective_couplings(graph, disorder)
    om = _phases(graph, gauge)
    terms = -J * np.cos(theta[graph.eu] - theta[graph.ev] - om)
    return math.fsum(terms.tolist())


def local_field(graph: WeightedGraph, spins, x: int, disorder=None, gauge=None) -> tuple[float, float]:
    """(magnitude, direction) of sum_y J_xy occ e^{i(theta_y + omega_xy)}."""
    theta = np.asarray(spins, dtype=float)
    indptr, indices, eid, sign = graph.csr
    J = effective_couplings(graph, disorder)
    om = _phases(graph, gauge)
    sl = slice(indptr[x], indptr[x + 1])
    z = np.sum(J[eid[sl]] * np.exp(1j * (theta[indices[sl]] + sign[sl] * om[eid[sl]])))
    return float(abs(z)), float(np.angle(z) % TWO_PI)


def phi4_energy(graph: WeightedGraph, state: Phi4State, beta: float, g: float, h: float) -> float:
    """-beta sum_e J_e R_u R_v cos(theta_u - theta_v) + sum_x (g R^4 + h R^2 - ln R)."""
    if not g > 0:
        raise DomainError("g must be positive")
    R = state.radii
    th = state.angles
    if np.any(R == 0):
        return math.inf
    pair = -beta * graph.coupling * R[graph.eu] * R[graph.ev] * np.cos(th[graph.eu] - th[graph.ev])
    site = g * R**4 + h * R**2 - np.log(R)
    return math.fsum(pair.tolist() + site.tolist())


def sample_gauge(graph: WeightedGraph, beta1: float, beta2: float, seed: int, index: int = 0) -> GaugeDisorder:
    """Independent phases with density proportional to e^{beta cos omega}.

    Beta2-class edges use ``beta2``; every other edge uses ``beta1``.
    """
    if beta1 < 0 or beta2 < 0:
        raise DomainError("gauge inverse temperatures must be nonnegative")
    gen = stream(seed, "gauge", index)
    kappa = np.where(graph.edge_class == EdgeClass.BETA2, beta2, beta1).astype(float)
    return GaugeDisorder(gen.vonmises(0.0, kappa))


def lambda_n(beta1: float, beta2: float, n: int) -> float:
    """(I1/I0)(beta1)^2 (I1/I0)(beta2)^(n-1)."""
    from .oracle import bessel_ratio

    if not (beta1 > 0 and beta2 > 0):
        raise DomainError("lambda_n needs positive inverse temperatures")
    if n < 1:
        raise DomainError("n must be at least 1")
    return bessel_ratio(beta1) ** 2 * bessel_ratio(beta2) ** (n - 1)


def lambda_expansion(beta1: float, beta2: float, n: int) -> float:
    return 1.0 - 1.0 / beta1 - (n - 1) / (2.0 * beta2)
