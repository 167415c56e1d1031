"""Nishimori-disordered correlations, the gauge identity and increasing paths."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .disorder import wilson_interval
from .errors import DomainError, SizeError
from .graphs import EdgeClass, WeightedGraph, build_extended_lattice
from .models import GaugeDisorder, lambda_n, sample_gauge
from .oracle import bessel_ratio
from .rng import stream
from .sampler import ChainSchedule, EstimatorResult, Pair, XYModel, combine_disorder, estimate, XYChain

TWO_PI = 2.0 * math.pi


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(int(rng), "paths", 0)


# ------------------------------------------------------------ paths


@dataclass(frozen=True)
class IncreasingPath:
    """Steps are coordinate indices 0..d-1; the path starts at the origin."""

    d: int
    steps: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.steps) // self.d

    def vertices(self) -> np.ndarray:
        pos = np.zeros((len(self.steps) + 1, self.d), dtype=np.int64)
        for i, s in enumerate(self.steps):
            pos[i + 1] = pos[i]
            pos[i + 1, s] += 1
        return pos

    @property
    def end(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.vertices()[-1])

    def edges(self) -> set[tuple[tuple[int, ...], int]]:
        """Directed edges as (tail vertex, direction)."""
        pos = self.vertices()
        return {(tuple(pos[i].tolist()), s) for i, s in enumerate(self.steps)}


def _check_dk(d: int, k: int):
    if d < 2 or k < 1:
        raise DomainError("need d >= 2 and k >= 1")


def sample_increasing_path(d: int, k: int, rng) -> IncreasingPath:
    """Uniform ordering of the multiset with k copies of each direction."""
    _check_dk(d, k)
    steps = np.repeat(np.arange(d), k)
    _generator(rng).shuffle(steps)
    return IncreasingPath(d, tuple(int(s) for s in steps))


def _sample_steps(d: int, k: int, count: int, gen: np.random.Generator) -> np.ndarray:
    base = np.tile(np.repeat(np.arange(d, dtype=np.int64), k), (count, 1))
    return gen.permuted(base, axis=1)


def _edge_keys(steps: np.ndarray, d: int, k: int) -> np.ndarray:
    """Integer code of each directed edge: tail position in base k+1, times d, plus direction."""
    onehot = steps[..., None] == np.arange(d)
    pos = np.cumsum(onehot, axis=1) - onehot  # position before each step
    place = (k + 1) ** np.arange(d, dtype=np.int64)
    return (pos @ place) * d + steps


def shared_edges(a: np.ndarray, b: np.ndarray, d: int, k: int) -> np.ndarray:
    """Row-wise count of directed edges shared by two batches of step sequences."""
    keys = np.sort(np.concatenate([_edge_keys(a, d, k), _edge_keys(b, d, k)], axis=1), axis=1)
    return (keys[:, 1:] == keys[:, :-1]).sum(axis=1)


@dataclass(frozen=True)
class IntersectionTail:
    d: int
    k: int
    trials: int
    counts: np.ndarray  # counts[j] = number of pairs with exactly j shared edges
    tail: np.ndarray  # P[shared >= j]
    lo: np.ndarray
    hi: np.ndarray


def intersection_tail(d: int, k: int, trials: int, rng, chunk: int = 20000) -> IntersectionTail:
    """Empirical P[|g1 & g2| >= j], j = 0..dk, for independent uniform paths."""
    _check_dk(d, k)
    if trials < 1:
        raise DomainError("trials must be positive")
    gen = _generator(rng)
    counts = np.zeros(d * k + 1, dtype=np.int64)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        a = _sample_steps(d, k, m, gen)
        b = _sample_steps(d, k, m, gen)
        counts += np.bincount(shared_edges(a, b, d, k), minlength=d * k + 1)
        done += m
    at_least = np.cumsum(counts[::-1])[::-1]
    ci = np.array([wilson_interval(int(c), trials) for c in at_least])
    return IntersectionTail(d, k, trials, counts, at_least / trials, ci[:, 0], ci[:, 1])


def all_increasing_paths(d: int, k: int, limit: int = 200_000) -> np.ndarray:
    _check_dk(d, k)
    total = math.factorial(d * k) // math.factorial(k) ** d
    if total > limit:
        raise SizeError(f"{total} paths exceed the enumeration limit")
    base = tuple(np.repeat(np.arange(d), k).tolist())
    return np.array(sorted(set(itertools.permutations(base))), dtype=np.int64)


def exact_intersection_law(d: int, k: int) -> np.ndarray:
    """P[|g1 & g2| = j] over all ordered pairs of paths, by enumeration."""
    paths = all_increasing_paths(d, k)
    m = len(paths)
    if m * m > 4_000_000:
        raise SizeError("too many pairs to enumerate")
    a = np.repeat(paths, m, axis=0)
    b = np.tile(paths, (m, 1))
    return np.bincount(shared_edges(a, b, d, k), minlength=d * k + 1) / (m * m)


@dataclass(frozen=True)
class TailFit:
    slope: float
    slope_err: float
    intercept: float
    used: tuple[int, ...]


def tail_slope(tail: IntersectionTail, min_hits: int = 20) -> TailFit:
    """Weighted fit of ln P[shared >= j] against j over j >= 1 with at least ``min_hits`` pairs."""
    hits = tail.tail * tail.trials
    js = [j for j in range(1, tail.tail.size) if hits[j] >= min_hits]
    if len(js) < 2:
        raise DomainError("not enough populated tail points for a fit")
    x = np.array(js, dtype=float)
    y = np.log(tail.tail[js])
    w = hits[js]  # var(ln p) ~ 1/hits
    W = w.sum()
    xm, ym = (w * x).sum() / W, (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return TailFit(float(slope), float(1.0 / math.sqrt(sxx)), float(ym - slope * xm), tuple(js))


# -------------------------------------------------------- gauge identity


@dataclass(frozen=True)
class GaugeIdentity:
    lhs: complex
    rhs: complex
    error: float
    grid: int


def _edge_betas(graph: WeightedGraph, beta1: float, beta2: float) -> np.ndarray:
    return np.where(graph.edge_class == EdgeClass.BETA2, beta2, beta1).astype(float)


def gauge_identity_check(
    graph: WeightedGraph, phase_edges, beta1: float, beta2: float, grid: int | None = None
) -> GaugeIdentity:
    """Both sides of E[<prod_e f_e(theta_u - theta_v - omega_e)>] = prod_e E[f_e(omega)].

    ``phase_edges`` marks the edges with f = e^{i.}; the others carry f = 1.
    The Gibbs weight on each edge uses the same inverse temperature as its
    phase density. The left side is a nested trapezoid rule over phases
    (outer) and angles (inner, one vertex pinned); the right side uses
    Bessel ratios.
    """
    E, V = graph.n_edges, graph.n_vertices
    if E > 3:
        raise SizeError("nested quadrature is limited to three edges")
    if (graph.components() != graph.components()[0]).any():
        raise DomainError("graph must be connected")
    mask = np.zeros(E, dtype=bool)
    mask[np.asarray(list(phase_edges), dtype=np.int64)] = True
    b = _edge_betas(graph, beta1, beta2)
    if grid is None:
        grid = 20 + 4 * math.ceil(float(b.max()))
    if grid ** (E + V - 1) > 2**30:
        raise SizeError("quadrature tensor too large")
    t = TWO_PI * np.arange(grid) / grid
    dens = [np.exp(b[e] * (np.cos(t) - 1.0)) for e in range(E)]
    dens = [w / w.sum() for w in dens]
    # axes: omega_1..omega_{E-1}, theta_1..theta_{V-1}; theta_0 = 0; omega_0 is looped over
    nd = E - 1 + V - 1

    def axis(i, vals):
        shape = [1] * nd
        shape[i] = grid
        return vals.reshape(shape)

    def theta(v):
        return 0.0 if v == 0 else axis(E - 1 + v - 1, t)

    inner = tuple(range(E - 1, nd))
    lhs = 0j
    for i0, om0 in enumerate(t):
        logw = np.zeros([1] * nd)
        phase = np.zeros([1] * nd)
        for e in range(E):
            om = om0 if e == 0 else axis(e - 1, t)
            diff = theta(int(graph.eu[e])) - theta(int(graph.ev[e])) - om
            logw = logw + b[e] * np.cos(diff)
            if mask[e]:
                phase = phase + diff
        w = np.exp(logw - logw.max())
        cond = (w * np.exp(1j * phase)).sum(axis=inner) / w.sum(axis=inner)
        rho = dens[0][i0]
        for e in range(1, E):
            shape = [1] * (E - 1)
            shape[e - 1] = grid
            rho = rho * dens[e].reshape(shape)
        lhs += complex((rho * cond).sum())
    rhs = complex(math.prod(bessel_ratio(b[e]) for e in range(E) if mask[e]))
    return GaugeIdentity(lhs, rhs, abs(lhs - rhs), grid)


def triangle_graph(beta: float = 1.0) -> WeightedGraph:
    """3-cycle on the corners of a unit right triangle."""
    return WeightedGraph(
        np.array([[0, 0], [1, 0], [0, 1]]),
        1,
        np.array([0, 1, 2]),
        np.array([1, 2, 0]),
        np.full(3, beta),
        np.zeros(3, dtype=np.int8),
        {"family": "cycle"},
    )


# --------------------------------------------------------- path identity


def path_edge_ids(graph: WeightedGraph, path: IncreasingPath) -> tuple[np.ndarray, np.ndarray]:
    """Edge ids of the extended-lattice path and the sign of each traversal (+1 along u -> v)."""
    s = graph.denom
    pos = path.vertices() * s
    ids, signs = [], []
    idx = graph.index
    for i, step in enumerate(path.steps):
        for j in range(s):
            a = pos[i].copy()
            a[step] += j
            c = a.copy()
            c[step] += 1
            u, v = idx[tuple(a.tolist())], idx[tuple(c.tolist())]
            e = graph.edge_index[(u, v)]
            ids.append(e)
            signs.append(1 if graph.eu[e] == u else -1)
    return np.array(ids), np.array(signs)


def canonical_path(d: int, k: int) -> IncreasingPath:
    """All e_1 steps, then all e_2 steps, and so on."""
    return IncreasingPath(d, tuple(np.repeat(np.arange(d), k).tolist()))


def path_identity_mc(
    d: int, k: int, n: int, beta1: float, beta2: float, samples: int, seed: int, path: IncreasingPath | None = None
) -> tuple[EstimatorResult, float]:
    """Monte Carlo mean of Re prod_gamma e^{i omega} from phases alone, next to lambda_n^{dk}."""
    _check_dk(d, k)
    graph = build_extended_lattice(d, k, n, beta1, beta2)
    path = path or canonical_path(d, k)
    ids, signs = path_edge_ids(graph, path)
    kappa = _edge_betas(graph, beta1, beta2)[ids]
    gen = stream(seed, "path-identity", 0)
    vals = np.empty(samples)
    block = max(1, 2_000_000 // ids.size)
    for i0 in range(0, samples, block):
        m = min(block, samples - i0)
        om = gen.vonmises(0.0, np.broadcast_to(kappa, (m, ids.size)))
        vals[i0 : i0 + m] = np.cos((om * signs).sum(axis=1))
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    return EstimatorResult(float(vals.mean()), se, 1.0, samples), lambda_n(beta1, beta2, n) ** (d * k)


@dataclass(frozen=True)
class NishimoriRecord:
    estimate: EstimatorResult
    per_disorder: list[EstimatorResult]
    lambda_bound: float  # lambda_n^{dk}
    path_identity: EstimatorResult


def nishimori_correlation_experiment(
    d: int,
    L: int,
    n: int,
    beta1: float,
    beta2: float,
    n_disorder: int,
    schedule: ChainSchedule | None = None,
    k: int = 1,
    path_samples: int = 20000,
) -> NishimoriRecord:
    """E^Nish[<cos(theta_0 - theta_k)>] on the extended box, averaged over gauge samples."""
    if k > L:
        raise DomainError("the target k(1,..,1) must lie in the box")
    schedule = schedule or ChainSchedule(200, 2000, 1, 0)
    graph = build_extended_lattice(d, L, n, beta1, beta2)
    o = graph.vertex_id((0,) * d)
    t = graph.vertex_id((k,) * d)
    per = []
    for i in range(n_disorder):
        gauge: GaugeDisorder = sample_gauge(graph, beta1, beta2, schedule.seed, i)
        # Nishimori phases concentrate near 0, so the aligned state is close to the ground state
        chain = XYChain(XYModel(graph, gauge=gauge), schedule, index=i, tag="nishimori", start="aligned")
        data = chain.run([Pair(o, t)])
        per.append(estimate(data[:, 0], schedule.measure_every))
    ident, lam = path_identity_mc(d, k, n, beta1, beta2, path_samples, schedule.seed)
    return NishimoriRecord(combine_disorder(per), per, lam, ident)
