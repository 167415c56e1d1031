"""Markov chains for the XY, Phi4 and height models, and the estimators built on them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .disorder import PercolationKind, sample_percolation
from .errors import DataError, DomainError, PrecisionError, UnsupportedError
from .graphs import WeightedGraph, build_box_lattice, build_extended_lattice
from .models import GaugeDisorder, Phi4State, effective_couplings
from .rng import stream

TWO_PI = 2.0 * math.pi


class Algorithm(Enum):
    METROPOLIS = "metropolis"
    HEATBATH = "heatbath"
    EMBEDDED_CLUSTER = "cluster"
    MIXED = "mixed"


@dataclass(frozen=True)
class ChainSchedule:
    thermalization: int = 1000
    measurement: int = 10000
    measure_every: int = 1
    seed: int = 0
    algorithm: Algorithm = Algorithm.MIXED

    def __post_init__(self):
        if self.thermalization < 0 or self.measurement < 0:
            raise ValueError("sweep counts must be nonnegative")
        if self.measure_every < 1:
            raise ValueError("measure_every must be at least 1")
        if not isinstance(self.algorithm, Algorithm):
            object.__setattr__(self, "algorithm", Algorithm(str(self.algorithm).lower()))


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    tau_int: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("an estimate needs at least one sample")


# ------------------------------------------------------------ statistics


def tau_int(series, c: float = 6.0) -> float:
    """Integrated autocorrelation time by automatic windowing (smallest W with W >= c tau(W))."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2:
        return 0.5
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return 0.5
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n] / (n * var)
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return max(float(tau), 0.5)


def estimate(series, sweeps_per_sample: int = 1) -> EstimatorResult:
    """Mean with standard error inflated by 2 tau_int; tau_int reported in sweeps."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise DataError("no samples")
    tau = tau_int(x)
    var = float(np.var(x))
    se = math.sqrt(var * 2.0 * tau / x.size) if x.size > 1 else 0.0
    return EstimatorResult(float(x.mean()), se, tau * sweeps_per_sample, int(x.size))


def combine_disorder(results: list[EstimatorResult]) -> EstimatorResult:
    """Average over independent disorder samples.

    The error is the larger of the between-sample spread and the propagated
    within-sample errors.
    """
    if not results:
        raise DataError("no disorder samples")
    means = np.array([r.mean for r in results])
    within = math.sqrt(sum(r.stderr**2 for r in results)) / len(results)
    between = float(np.std(means, ddof=1)) / math.sqrt(len(results)) if len(results) > 1 else 0.0
    return EstimatorResult(
        float(means.mean()),
        max(between, within),
        float(np.mean([r.tau_int for r in results])),
        int(sum(r.n_samples for r in results)),
    )


# ----------------------------------------------------------- XY kernels


def _slot_arrays(graph: WeightedGraph, disorder=None, gauge: GaugeDisorder | None = None, couplings=None):
    indptr, indices, eid, sign = graph.csr
    J = effective_couplings(graph, disorder, couplings)
    weight = np.ascontiguousarray(J[eid])
    if gauge is None:
        phase = np.zeros(eid.size)
    else:
        phase = np.ascontiguousarray(sign * gauge.omega[eid])
    return indptr, indices, weight, phase


def heatbath_sweep(graph, spins, disorder=None, gauge=None, rng=None) -> np.ndarray:
    """One sequential sweep of exact von Mises conditionals; returns the new angles."""
    indptr, indices, weight, phase = _slot_arrays(graph, disorder, gauge)
    theta = np.array(spins, dtype=float)
    kernels.heatbath_sweep(indptr, indices, weight, phase, theta, np.arange(graph.n_vertices), rng)
    return theta


def embedded_cluster_update(graph, spins, disorder=None, rng=None, gauge=None) -> np.ndarray:
    """Reflect one embedded Ising cluster about a random axis."""
    if gauge is not None:
        raise UnsupportedError("cluster moves need zero gauge phases")
    indptr, indices, weight, _ = _slot_arrays(graph, disorder)
    theta = np.array(spins, dtype=float)
    kernels.cluster_update(indptr, indices, weight, theta, rng)
    return theta


def phi4_sweep(graph, state: Phi4State, beta: float, g: float, h: float, rng, step: float = 0.5) -> Phi4State:
    if not g > 0:
        raise DomainError("g must be positive")
    indptr, indices, eid, _ = graph.csr
    weight = np.ascontiguousarray(graph.coupling[eid])
    radius = np.array(state.radii, dtype=float)
    theta = np.array(state.angles, dtype=float)
    kernels.phi4_sweep(indptr, indices, weight, radius, theta, float(beta), float(g), float(h), float(step), rng)
    return Phi4State(radius, theta)


def height_sweep(dual, heights, potentials, rng, free=None, window: int | None = None) -> np.ndarray:
    """One sweep over the free faces of the exact discrete conditionals.

    ``potentials`` is a (2, K + 1) table of V_t(k) - V_t(0) for types 1 and 2.
    """
    indptr, indices, etype = dual.csr
    h = np.array(heights, dtype=np.int64)
    table = _type_table(potentials)
    order = np.arange(h.size) if free is None else np.asarray(free, dtype=np.int64)
    window = _window(table) if window is None else window
    status = kernels.height_sweep(indptr, indices, etype, h, order, table, window, rng)
    if status:
        raise PrecisionError("height update left the tabulated range or lost tail mass")
    return h


def _type_table(potentials) -> np.ndarray:
    """Row t holds the potential of dual edge type t (row 0 is unused)."""
    pot = np.asarray(potentials, dtype=float)
    table = np.zeros((3, pot.shape[1]))
    table[1:] = pot
    return table


def _window(table: np.ndarray, mass: float = 40.0) -> int:
    """Smallest k with V_t(k) - V_t(0) >= mass for both types; beyond it the weight is negligible."""
    for k in range(1, table.shape[1]):
        if table[1, k] >= mass and table[2, k] >= mass:
            return k
    raise PrecisionError("potential table too short for a safe window")


# ------------------------------------------------------------- XY chain


@dataclass(frozen=True)
class XYModel:
    graph: WeightedGraph
    disorder: object | None = None
    gauge: GaugeDisorder | None = None
    couplings: np.ndarray | None = None


@dataclass(frozen=True)
class Pair:
    x: int
    y: int


@dataclass(frozen=True)
class PairSum:
    """Sum of cos(theta_x - theta_y) over a list of pairs."""

    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ImprovedProfile:
    """Cluster-estimator average of <cos(theta_y - theta_{y+v})> over y in ``sources``.

    One entry per displacement; each displacement is averaged over both axes
    and both signs. Needs zero gauge phases.
    """

    sources: np.ndarray = field(compare=False)
    targets: np.ndarray = field(compare=False)  # (n_dist, n_pairs) vertex ids, -1 when off the box
    src_index: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class SpatialAverage:
    """(1 / |B| |Lambda_m|) sum_{x in B} sum_{y in x + Lambda_m} cos(theta_x - theta_y), plain or cluster-improved."""

    xs: np.ndarray = field(compare=False)
    ys: np.ndarray = field(compare=False)
    norm: float
    improved: bool = True


def improved_profile(graph: WeightedGraph, distances, bulk_half: int) -> ImprovedProfile:
    """Displacements r e_k and -r e_k for every axis k, from every y with |y|_inf <= bulk_half."""
    coords = graph.coords
    index = graph.index
    src = np.nonzero(np.abs(coords).max(axis=1) <= bulk_half)[0]
    d = graph.dim
    tg = []
    sx = []
    for r in distances:
        row = []
        for k in range(d):
            for s in (1, -1):
                off = np.zeros(d, dtype=np.int64)
                off[k] = s * int(r)
                row.append([index.get(tuple((coords[y] + off).tolist()), -1) for y in src.tolist()])
        tg.append(np.concatenate(row))
    sx = np.tile(src, 2 * d)
    return ImprovedProfile(src, np.array(tg, dtype=np.int64), sx)


def spatial_average(graph: WeightedGraph, half: int, m: int, improved: bool = True) -> SpatialAverage:
    """Pairs (x, y) with x in Lambda_half and y - x in Lambda_m, normalised by |Lambda_half| |Lambda_m|."""
    coords = graph.coords
    index = graph.index
    d = graph.dim
    xs = np.nonzero(np.abs(coords).max(axis=1) <= half)[0]
    offs = np.array(list(np.ndindex(*([2 * m + 1] * d)))) - m
    px, py = [], []
    for x in xs.tolist():
        for o in offs:
            y = index.get(tuple((coords[x] + o).tolist()))
            if y is None:
                raise DomainError("x + Lambda_m leaves the box")
            px.append(x)
            py.append(y)
    norm = float(xs.size * offs.shape[0])
    return SpatialAverage(np.array(px), np.array(py), norm, improved)


class XYChain:
    """One XY chain with a private random stream."""

    def __init__(self, model: XYModel, schedule: ChainSchedule, index: int = 0, tag: str = "xy", start: str = "random"):
        if start not in ("random", "aligned"):
            raise ValueError("start must be 'random' or 'aligned'")
        self.model = model
        self.schedule = schedule
        g = model.graph
        self.gen = stream(schedule.seed, tag, index)
        self.indptr, self.indices, self.weight, self.phase = _slot_arrays(g, model.disorder, model.gauge, model.couplings)
        self.J = effective_couplings(g, model.disorder, model.couplings)
        self.order = np.arange(g.n_vertices)
        # an aligned start avoids vortices frozen in by a quench at very large beta
        self.theta = self.gen.random(g.n_vertices) * TWO_PI if start == "random" else np.zeros(g.n_vertices)
        self.eps = 1.0
        algo = schedule.algorithm
        if model.gauge is not None and np.any(model.gauge.omega != 0) and algo in (
            Algorithm.EMBEDDED_CLUSTER,
            Algorithm.MIXED,
        ):
            if algo is Algorithm.EMBEDDED_CLUSTER:
                raise UnsupportedError("cluster moves need zero gauge phases")
            algo = Algorithm.HEATBATH
        self.algorithm = algo

    def sweep(self, tune: bool = False) -> None:
        algo = self.algorithm
        if algo is Algorithm.METROPOLIS:
            acc = kernels.metropolis_sweep(
                self.indptr, self.indices, self.weight, self.phase, self.theta, self.order, self.eps, self.gen
            )
            if tune and self.order.size:
                rate = acc / self.order.size
                self.eps = min(math.pi, max(1e-3, self.eps * math.exp(rate - 0.5)))
            return
        if algo in (Algorithm.HEATBATH, Algorithm.MIXED):
            kernels.heatbath_sweep(self.indptr, self.indices, self.weight, self.phase, self.theta, self.order, self.gen)
        if algo in (Algorithm.EMBEDDED_CLUSTER, Algorithm.MIXED):
            kernels.cluster_update(self.indptr, self.indices, self.weight, self.theta, self.gen)

    def thermalize(self) -> None:
        for _ in range(self.schedule.thermalization):
            self.sweep(tune=True)

    def fk_clusters(self):
        phi = TWO_PI * self.gen.random()
        g = self.model.graph
        labels = kernels.fk_labels(g.n_vertices, g.eu, g.ev, self.J, self.theta, phi, self.gen)
        return labels, np.abs(np.cos(self.theta - phi))

    def measure(self, observables) -> list[float]:
        th = self.theta
        fk = None
        out = []
        for ob in observables:
            if isinstance(ob, Pair):
                out.append(math.cos(th[ob.x] - th[ob.y]))
            elif isinstance(ob, PairSum):
                p = np.asarray(ob.pairs, dtype=np.int64).reshape(-1, 2)
                out.append(float(np.cos(th[p[:, 0]] - th[p[:, 1]]).sum()))
            elif isinstance(ob, ImprovedProfile):
                if fk is None:
                    fk = self.fk_clusters()
                labels, proj = fk
                src = ob.src_index
                for row in ob.targets:
                    ok = row >= 0
                    tgt = np.where(ok, row, 0)
                    hit = ok & (labels[src] == labels[tgt])
                    val = 2.0 * proj[src] * proj[tgt] * hit
                    out.append(float(val.sum()) / max(int(ok.sum()), 1))
            elif isinstance(ob, SpatialAverage):
                if ob.improved:
                    if fk is None:
                        fk = self.fk_clusters()
                    labels, proj = fk
                    same = labels[ob.xs] == labels[ob.ys]
                    out.append(float((2.0 * proj[ob.xs] * proj[ob.ys] * same).sum()) / ob.norm)
                else:
                    out.append(float(np.cos(th[ob.xs] - th[ob.ys]).sum()) / ob.norm)
            else:
                raise TypeError(f"unknown observable {ob!r}")
        return out

    def run(self, observables) -> np.ndarray:
        sch = self.schedule
        if sch.measurement == 0:
            raise ValueError("zero measurement sweeps")
        self.thermalize()
        rows = []
        for s in range(1, sch.measurement + 1):
            self.sweep()
            if s % sch.measure_every == 0:
                rows.append(self.measure(observables))
        return np.asarray(rows, dtype=float)


def run_chain(model: XYModel, schedule: ChainSchedule, observables, index: int = 0) -> list[EstimatorResult]:
    """Thermalise, measure every ``measure_every`` sweeps, and return one estimate per scalar column."""
    chain = XYChain(model, schedule, index)
    data = chain.run(observables)
    return [estimate(data[:, j], schedule.measure_every) for j in range(data.shape[1])]


# --------------------------------------------------------- quenched runs


@dataclass(frozen=True)
class QuenchedProfile:
    distances: tuple[int, ...]
    combined: list[EstimatorResult]
    per_disorder: list[list[EstimatorResult]]  # [disorder][distance]
    extra: list[list[EstimatorResult]] = field(default_factory=list)


def _zero_floor(res: EstimatorResult, n_pairs: int) -> EstimatorResult:
    """An all-zero series still carries the resolution of its sample count."""
    if res.stderr > 0 or res.mean != 0.0:
        return res
    return EstimatorResult(0.0, 2.0 / (res.n_samples * max(n_pairs, 1)), res.tau_int, res.n_samples)


def _quenched_task(args):
    d, L, p, beta, kind, distances, schedule, i, bulk, spatial = args
    graph = build_box_lattice(d, L, beta)
    dis = None
    if p < 1.0:
        dis = sample_percolation(graph, kind, p, schedule.seed, index=i)
    prof = improved_profile(graph, distances, bulk)
    obs = [prof]
    if spatial is not None:
        obs.append(spatial_average(graph, spatial[0], spatial[1]))
    chain = XYChain(XYModel(graph, dis), schedule, index=i, tag="quenched")
    data = chain.run(obs)
    n_pairs = prof.targets.shape[1]
    res = [_zero_floor(estimate(data[:, j], schedule.measure_every), n_pairs) for j in range(len(distances))]
    extra = [estimate(data[:, j], schedule.measure_every) for j in range(len(distances), data.shape[1])]
    return res, extra


def quenched_profile(
    d: int,
    L: int,
    p: float,
    beta: float,
    distances,
    kind="site",
    n_disorder: int = 8,
    schedule: ChainSchedule | None = None,
    bulk_half: int | None = None,
    spatial: tuple[int, int] | None = None,
    workers: int = 1,
) -> QuenchedProfile:
    """E_p of the bulk-averaged cluster estimator of <cos(theta_y - theta_{y+r e_k})> for each r.

    Disorder sample i uses percolation stream i and chain stream i, so
    results do not depend on ``workers``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    schedule = schedule or ChainSchedule()
    kind = kind if isinstance(kind, PercolationKind) else PercolationKind(str(kind).lower())
    bulk = L // 2 if bulk_half is None else bulk_half
    dist = tuple(int(r) for r in distances)
    tasks = [(d, L, p, beta, kind, dist, schedule, i, bulk, spatial) for i in range(n_disorder)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_quenched_task, tasks))
    else:
        out = [_quenched_task(t) for t in tasks]
    per = [o[0] for o in out]
    combined = [combine_disorder([per[i][j] for i in range(n_disorder)]) for j in range(len(dist))]
    return QuenchedProfile(dist, combined, per, [o[1] for o in out])


def quenched_two_point(
    d: int, L: int, p: float, beta: float, x, kind="site", n_disorder: int = 8, schedule: ChainSchedule | None = None
) -> EstimatorResult:
    """E_p[<cos(theta_0 - theta_x)>] with the plain estimator at the origin."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    schedule = schedule or ChainSchedule()
    graph = build_box_lattice(d, L, beta)
    o = graph.vertex_id((0,) * d)
    t = graph.vertex_id(tuple(int(v) for v in x))
    res = []
    for i in range(n_disorder):
        dis = None if p == 1.0 else sample_percolation(graph, kind, p, schedule.seed, index=i)
        chain = XYChain(XYModel(graph, dis), schedule, index=i, tag="quenched")
        data = chain.run([Pair(o, t)])
        res.append(estimate(data[:, 0], schedule.measure_every))
    return combine_disorder(res)


def phi_R_estimator(
    d: int, n: int, beta1: float, beta2: float, R: int, schedule: ChainSchedule | None = None
) -> EstimatorResult:
    """Sum over the boundary of Lambda_R^n of <cos(theta_0 - theta_y)>, free boundary."""
    if R < 1:
        raise DomainError("R must be at least 1")
    schedule = schedule or ChainSchedule()
    graph = build_extended_lattice(d, R, n, beta1, beta2)
    o = graph.vertex_id((0,) * d)
    edge = np.abs(graph.coords).max(axis=1) == R * graph.denom
    pairs = tuple((o, int(y)) for y in np.nonzero(edge)[0].tolist())
    return run_chain(XYModel(graph), schedule, [PairSum(pairs)])[0]


# ------------------------------------------------------------- Phi4 chain


def run_phi4_chain(graph: WeightedGraph, beta: float, g: float, h: float, schedule: ChainSchedule, observables, index=0):
    """Observables are ("SS", x, y) or ("R2", x); returns one EstimatorResult each."""
    if schedule.measurement == 0:
        raise ValueError("zero measurement sweeps")
    gen = stream(schedule.seed, "phi4", index)
    n = graph.n_vertices
    indptr, indices, eid, _ = graph.csr
    weight = np.ascontiguousarray(graph.coupling[eid])
    radius = np.ones(n)
    theta = gen.random(n) * TWO_PI
    step = 0.5
    for _ in range(schedule.thermalization):
        acc = kernels.phi4_sweep(indptr, indices, weight, radius, theta, beta, g, h, step, gen)
        if n:
            step = min(3.0, max(1e-3, step * math.exp(acc / n - 0.5)))
    rows = []
    for s in range(1, schedule.measurement + 1):
        kernels.phi4_sweep(indptr, indices, weight, radius, theta, beta, g, h, step, gen)
        if s % schedule.measure_every == 0:
            row = []
            for ob in observables:
                if ob[0] == "SS":
                    x, y = ob[1], ob[2]
                    row.append(radius[x] * radius[y] * math.cos(theta[x] - theta[y]))
                elif ob[0] == "R2":
                    row.append(radius[ob[1]] ** 2)
                else:
                    raise ValueError(f"unknown observable {ob[0]!r}")
            rows.append(row)
    data = np.asarray(rows)
    return [estimate(data[:, j], schedule.measure_every) for j in range(data.shape[1])]


# --------------------------------------------------------- classification


class Verdict(Enum):
    EXPONENTIAL = "Exponential"
    POWER_LAW = "PowerLaw"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DecayFit:
    verdict: Verdict
    rate: float  # exponential rate, or power exponent for PowerLaw
    rate_err: float
    chi2_exp: float
    chi2_pow: float
    exp_params: tuple[float, float]
    pow_params: tuple[float, float]


def _wls(x, y, w):
    """Weighted straight-line fit y = a + b x; returns (a, b, cov)."""
    A = np.column_stack([np.ones_like(x), x])
    W = np.diag(w)
    M = A.T @ W @ A
    cov = np.linalg.inv(M)
    a, b = cov @ A.T @ W @ y
    return float(a), float(b), cov


def decay_classifier(distances, values, errors, ratio: float = 3.0, significance: float = 3.0) -> DecayFit:
    """Exponential vs power-law decay of a positive correlation profile.

    Points with value > 2 err drive weighted fits of log v against x and
    against log x. Both models are then scored by chi^2 in linear space over
    every point, so points compatible with zero act as upper bounds. A model
    wins when the other's chi^2 is ``ratio`` times larger and its decay
    parameter is ``significance`` standard errors from zero.
    """
    x = np.asarray(distances, dtype=float)
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if not (x.shape == v.shape == e.shape):
        raise ValueError("inputs must have equal length")
    if np.unique(x).size < 4:
        raise DataError("need at least 4 distinct distances")
    if np.any(e < 0) or np.any(x <= 0):
        raise DataError("errors must be nonnegative and distances positive")
    bad = (v <= 0) & ((e == 0) | (v < -3.0 * e))
    if np.any(bad):
        raise DataError("nonpositive values with small errors")
    sig = v > 2.0 * e
    nan = (float("nan"), float("nan"))
    if sig.sum() < 2:
        return DecayFit(Verdict.INCONCLUSIVE, math.nan, math.nan, math.nan, math.nan, nan, nan)
    xs, ls, ws = x[sig], np.log(v[sig]), (v[sig] / np.maximum(e[sig], 1e-300)) ** 2
    ae, be, ce = _wls(xs, ls, ws)
    ap, bp, cp = _wls(np.log(xs), ls, ws)
    floor = np.maximum(e, 1e-300)
    chi_e = float((((v - np.exp(ae + be * x)) / floor) ** 2).sum())
    chi_p = float((((v - np.exp(ap + bp * np.log(x))) / floor) ** 2).sum())
    se_e = math.sqrt(ce[1, 1]) if sig.sum() > 2 else math.inf
    se_p = math.sqrt(cp[1, 1]) if sig.sum() > 2 else math.inf
    if sig.sum() == 2:
        # two points fix both lines; judge by the upper-bound points alone
        se_e = se_p = 0.0
    rate, exponent = -be, -bp
    exp_ok = rate > significance * se_e and chi_p >= ratio * max(chi_e, 1e-12)
    pow_ok = exponent > significance * se_p and chi_e >= ratio * max(chi_p, 1e-12)
    if exp_ok and not pow_ok:
        return DecayFit(Verdict.EXPONENTIAL, rate, se_e, chi_e, chi_p, (ae, be), (ap, bp))
    if pow_ok and not exp_ok:
        return DecayFit(Verdict.POWER_LAW, exponent, se_p, chi_e, chi_p, (ae, be), (ap, bp))
    return DecayFit(Verdict.INCONCLUSIVE, math.nan, math.nan, chi_e, chi_p, (ae, be), (ap, bp))
