"""Integer height functions on the dual of the extended triangulation.

Dual edges of type 1 cross n + 1 primal segments, type 2 edges cross
2n + 2; the potentials are sums of -ln I_k over those segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PrecisionError
from .graphs import DualGraph, DualType, build_dual_graph, build_extended_triangulation
from .oracle import bessel_ratio, log_bessel_I
from .rng import stream
from .sampler import ChainSchedule, EstimatorResult, _window, estimate
from . import kernels

LN2 = math.log(2.0)
K_MAX = 50


def _multiplicity(edge_type) -> tuple[int, int]:
    """(weight of beta1 term, weight per (n - 1) of the beta2 term)."""
    t = DualType(int(edge_type.value if hasattr(edge_type, "value") else edge_type))
    return (2, 1) if t is DualType.TYPE1 else (4, 2)


def _check(beta1: float, beta2: float):
    if not (0.0 < beta1 <= 50.0 and 0.0 < beta2 <= 50.0):
        raise DomainError("beta1, beta2 must lie in (0, 50]")


def potential_V(edge_type, n: int, beta1: float, beta2: float, k: int) -> float:
    """Type 1: -2 ln I_k(2 beta1) - (n-1) ln I_k(2 beta2); type 2 doubles both weights."""
    _check(beta1, beta2)
    if abs(k) > K_MAX:
        raise DomainError(f"|k| must be at most {K_MAX}")
    a, b = _multiplicity(edge_type)
    return -a * log_bessel_I(k, 2.0 * beta1) - b * (n - 1) * log_bessel_I(k, 2.0 * beta2)


def potential_difference_ratio_form(edge_type, n: int, beta1: float, beta2: float, k: int) -> float:
    """V(k) - V(0) as a sum of ln(I_{j}/I_{j+1}) ratios, j < |k|."""
    _check(beta1, beta2)
    a, b = _multiplicity(edge_type)
    total = 0.0
    for j in range(abs(int(k))):
        total += a * -math.log(bessel_ratio(2.0 * beta1, j)) + b * (n - 1) * -math.log(bessel_ratio(2.0 * beta2, j))
    return total


@dataclass(frozen=True, eq=False)
class DualPotential:
    edge_type: DualType
    n: int
    beta1: float
    beta2: float
    values: np.ndarray  # V(k) for k = 0..K

    @classmethod
    def build(cls, edge_type, n: int, beta1: float, beta2: float, kmax: int = K_MAX) -> DualPotential:
        vals = np.array([potential_V(edge_type, n, beta1, beta2, k) for k in range(kmax + 1)])
        vals.setflags(write=False)
        return cls(DualType(int(getattr(edge_type, "value", edge_type))), n, beta1, beta2, vals)

    def __call__(self, k: int) -> float:
        return float(self.values[abs(int(k))])

    def differences(self) -> np.ndarray:
        return self.values - self.values[0]

    def convexity_margin(self) -> float:
        """min over tabulated k of V(k-1) + V(k+1) - 2 V(k), using V(-1) = V(1) at k = 0."""
        v = self.values
        full = np.concatenate([v[:0:-1], v])
        return float((full[:-2] + full[2:] - 2.0 * full[1:-1]).min())


@lru_cache(maxsize=64)
def potential_table(n: int, beta1: float, beta2: float) -> np.ndarray:
    """(2, K_MAX + 1) array of V_t(k) - V_t(0) for types 1 and 2."""
    return np.vstack(
        [DualPotential.build(t, n, beta1, beta2).differences() for t in (DualType.TYPE1, DualType.TYPE2)]
    )


@dataclass(frozen=True)
class LammersReport:
    type1_ok: bool
    type2_ok: bool
    type1_margin: float
    type2_margin: float
    surrogate_ok: bool  # both ratio conditions hold
    surrogate_type1_bound: float  # ln 2 / 4 + 1 / 4
    surrogate_type2_bound: float  # ln 2 / 2 + 1 / 2
    type2_discrepancy: bool  # surrogate holds yet its Type 2 bound exceeds ln 2


def lammers_check(n: int, beta1: float, beta2: float) -> LammersReport:
    """Direct check V(1) <= V(0) + ln 2 per type, next to the ratio-condition surrogate."""
    _check(beta1, beta2)
    m1 = LN2 - (potential_V(DualType.TYPE1, n, beta1, beta2, 1) - potential_V(DualType.TYPE1, n, beta1, beta2, 0))
    m2 = LN2 - (potential_V(DualType.TYPE2, n, beta1, beta2, 1) - potential_V(DualType.TYPE2, n, beta1, beta2, 0))
    r1 = 1.0 / bessel_ratio(2.0 * beta1)
    r2 = 1.0 / bessel_ratio(2.0 * beta2)
    surrogate = r1 <= 2.0 ** 0.125 and (n < 2 or r2 <= math.exp(1.0 / (4.0 * (n - 1))))
    b1 = LN2 / 4.0 + 0.25
    b2 = LN2 / 2.0 + 0.5
    return LammersReport(m1 >= 0.0, m2 >= 0.0, m1, m2, surrogate, b1, b2, bool(surrogate and b2 > LN2))


def _solve_ratio(target: float, ratio, lo: float = 1e-6, hi: float = 50.0) -> float:
    """beta with I_0(2 beta)/I_1(2 beta) = target; the left side decreases in beta."""

    def f(b):
        return 1.0 / ratio(2.0 * b) - target

    if f(lo) * f(hi) > 0:
        raise PrecisionError("threshold not bracketed in (0, 50]")
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=500)


def threshold_beta1() -> float:
    """Root of I_0(2 b)/I_1(2 b) = 2^(1/8)."""
    return _solve_ratio(2.0 ** 0.125, bessel_ratio)


def threshold_beta2(n: int) -> float:
    """Root of I_0(2 b)/I_1(2 b) = e^(1/(4(n-1)))."""
    if n < 2:
        raise DomainError("threshold_beta2 needs n >= 2")
    return _solve_ratio(math.exp(1.0 / (4.0 * (n - 1))), bessel_ratio)


def threshold_by_bisection(target: float, ratio, lo: float = 1e-6, hi: float = 50.0, tol: float = 1e-12) -> float:
    """Plain bisection, used with quadrature Bessel ratios as an independent route."""
    flo = 1.0 / ratio(2.0 * lo) - target
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = 1.0 / ratio(2.0 * mid) - target
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------ domains


@dataclass
class HeightState:
    h: np.ndarray
    free: np.ndarray  # ids of faces that are resampled; every other face stays 0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.int64)
        self.free = np.asarray(self.free, dtype=np.int64)
        pinned = np.ones(self.h.size, dtype=bool)
        pinned[self.free] = False
        if np.any(self.h[pinned] != 0):
            raise ValueError("boundary faces must be at height 0")


@dataclass(frozen=True, eq=False)
class HeightDomain:
    dual: DualGraph
    free: np.ndarray
    radius: int


def height_domain(n: int, radius: int, beta1: float = 1.0, beta2: float = 1.0) -> HeightDomain:
    """Faces within dual distance ``radius`` of the root are free, all others pinned at 0."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    L = radius // 2 + 2
    while True:
        dual = build_dual_graph(build_extended_triangulation(L, n, beta1, beta2))
        dist = dual.distances()
        free = np.nonzero(dist <= radius)[0]
        outer = [f.id for f in dual.faces if max(abs(f.square[0] + 0.5), abs(f.square[1] + 0.5)) >= L - 1]
        if not np.any(dist[outer] <= radius + 1):
            return HeightDomain(dual, free, radius)
        L += 1


class HeightChain:
    def __init__(self, domain: HeightDomain, n: int, beta1: float, beta2: float, seed: int, index: int = 0):
        self.domain = domain
        self.table = np.zeros((3, K_MAX + 1))
        self.table[1:] = potential_table(n, beta1, beta2)
        self.window = _window(self.table)
        self.indptr, self.indices, self.etype = domain.dual.csr
        self.h = np.zeros(domain.dual.n_faces, dtype=np.int64)
        self.gen = stream(seed, "height", index)

    def sweep(self) -> None:
        status = kernels.height_sweep(
            self.indptr, self.indices, self.etype, self.h, self.domain.free, self.table, self.window, self.gen
        )
        if status:
            raise PrecisionError("height update left the tabulated range or lost tail mass")


def single_face_law(n: int, beta1: float, beta2: float, types, span: int = 20) -> np.ndarray:
    """Law of h at a face whose neighbours are all 0, by direct summation over [-span, span]."""
    ks = np.arange(-span, span + 1)
    e = np.zeros(ks.size)
    for t in types:
        pot = DualPotential.build(t, n, beta1, beta2)
        e += np.array([pot(k) - pot(0) for k in ks])
    w = np.exp(-(e - e.min()))
    return w / w.sum()


@dataclass(frozen=True)
class DelocalizationRow:
    radius: int
    n_free: int
    estimate: EstimatorResult


@dataclass(frozen=True)
class DelocalizationResult:
    rows: list[DelocalizationRow]
    lammers: LammersReport
    exploratory: bool
    monotone: bool  # every consecutive drop within 3 combined sigma
    min_step_z: float


def delocalization_experiment(
    n: int, beta1: float, beta2: float, sizes, schedule: ChainSchedule | None = None
) -> DelocalizationResult:
    """E|h(root)| on nested dual balls of the given radii."""
    schedule = schedule or ChainSchedule(200, 2000, 1, 0)
    lam = lammers_check(n, beta1, beta2)
    rows = []
    for i, r in enumerate(sizes):
        dom = height_domain(n, int(r))
        chain = HeightChain(dom, n, beta1, beta2, schedule.seed, index=i)
        root = dom.dual.root
        for _ in range(schedule.thermalization):
            chain.sweep()
        vals = []
        for s in range(1, schedule.measurement + 1):
            chain.sweep()
            if s % schedule.measure_every == 0:
                vals.append(abs(int(chain.h[root])))
        rows.append(DelocalizationRow(int(r), int(dom.free.size), estimate(vals, schedule.measure_every)))
    zs = []
    for a, b in zip(rows, rows[1:]):
        se = math.hypot(a.estimate.stderr, b.estimate.stderr)
        diff = b.estimate.mean - a.estimate.mean
        zs.append(diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff)))
    min_z = min(zs) if zs else math.inf
    return DelocalizationResult(rows, lam, not (lam.type1_ok and lam.type2_ok), min_z >= -3.0, min_z)
