"""Exact and high-precision reference computations on small graphs.

Angular integrals are evaluated on a uniform periodic grid, which is
spectrally accurate for the entire integrands involved. Multi-spin
integrals are contracted edge by edge with ``numpy.einsum`` so that a
3x3 box costs ``grid^4`` work rather than ``grid^8``.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError, PrecisionError, SizeError
from .graphs import WeightedGraph, induced_subgraph
from .models import MeasureKind, SingleSiteMeasure, effective_couplings

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- Bessel


def bessel_I(k: int, x: float) -> float:
    """Modified Bessel function I_k(x) from its power series, 0 <= x <= 100."""
    k = abs(int(k))
    x = float(x)
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x > 100:
        raise DomainError("x > 100 is outside the series range")
    if x == 0.0:
        return 1.0 if k == 0 else 0.0
    half = 0.5 * x
    term = 1.0
    for j in range(1, k + 1):
        term *= half / j
    total = term
    q = half * half
    for i in range(1, 500):
        term *= q / (i * (i + k))
        total += term
        if term < 1e-16 * total:
            break
    return total


def bessel_iv(k: int, x) -> np.ndarray:
    """Vectorised power series for I_k on an array, 0 <= x <= 100."""
    k = abs(int(k))
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 100):
        raise DomainError("series range is 0 <= x <= 100")
    half = 0.5 * x
    term = np.ones_like(x)
    for j in range(1, k + 1):
        term = term * half / j
    total = term.copy()
    q = half * half
    for i in range(1, 500):
        term = term * q / (i * (i + k))
        total += term
        if np.all(term <= 1e-16 * total):
            break
    return total


def log_bessel_I(k: int, x: float) -> float:
    """ln I_k(x) from the same series, kept in log form so large k at small x does not underflow."""
    k = abs(int(k))
    x = float(x)
    if x < 0 or x > 100:
        raise DomainError("series range is 0 <= x <= 100")
    if x == 0.0:
        return 0.0 if k == 0 else -math.inf
    lead = k * math.log(0.5 * x) - math.lgamma(k + 1)
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    for i in range(1, 500):
        term *= q / (i * (i + k))
        total += term
        if term < 1e-16 * total:
            break
    return lead + math.log(total)


def bessel_ratio(x: float, k: int = 0) -> float:
    """I_{k+1}(x) / I_k(x) for any x >= 0, by backward continued fraction."""
    x = float(x)
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    depth = k + 60 + int(2.5 * x)
    r = 0.0
    for j in range(depth, k, -1):
        r = 1.0 / (2.0 * j / x + r)
    return r


def bessel_I_quadrature(k: int, x: float, grid: int | None = None) -> float:
    """I_k(x) = (1/2 pi) int e^{x cos t} cos(k t) dt on a periodic grid."""
    if grid is None:
        grid = max(128, 4 * (int(x) + abs(int(k)) + 40))
    t = TWO_PI * np.arange(grid) / grid
    vals = np.exp(x * (np.cos(t) - 1.0)) * np.cos(k * t)
    return math.fsum(vals.tolist()) / grid * math.exp(x)


def bessel_ratio_quadrature(x: float, k: int = 0, grid: int | None = None) -> float:
    if grid is None:
        grid = max(128, 4 * (int(x) + abs(int(k)) + 40))
    t = TWO_PI * np.arange(grid) / grid
    w = np.exp(x * (np.cos(t) - 1.0))
    return math.fsum((w * np.cos((k + 1) * t)).tolist()) / math.fsum((w * np.cos(k * t)).tolist())


# ------------------------------------------------------- XY quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    grid: int = 64
    max_elements: int = 2**26
    radial_nodes: int = 200

    def __post_init__(self):
        if self.grid < 16:
            raise ValueError("angular grid must have at least 16 points")


DEFAULT_QUAD = QuadratureSpec()


def _components(n: int, eu: np.ndarray, ev: np.ndarray) -> list[list[int]]:
    from .kernels import union_find_labels

    labels = union_find_labels(n, eu, ev, np.ones(eu.size, dtype=np.uint8))
    comps: dict[int, list[int]] = {}
    for v, lab in enumerate(labels.tolist()):
        comps.setdefault(lab, []).append(v)
    return [comps[k] for k in sorted(comps)]


_LETTERS = string.ascii_letters


def _path_footprint(expr: str, path, grid: int) -> int:
    """Largest iteration space, in grid points, over the steps of an einsum path.

    numpy's own report only counts intermediates, and greedy paths may end in
    one multi-operand call whose loop is far larger than any intermediate.
    """
    terms = expr.split("->")[0].split(",")
    worst = 1
    for step in path[1:]:
        picked = [terms[i] for i in step]
        letters = set("".join(picked))
        worst = max(worst, grid ** len(letters))
        for i in sorted(step, reverse=True):
            del terms[i]
        rest = set("".join(terms))
        terms.append("".join(sorted(c for c in letters if c in rest)))
    return worst


def _contract(n, eu, ev, J, omega, vertex_factors, grid, max_elements):
    """Per-component (numerator, partition) of prod_v f_v(theta_v) against the XY weight.

    Both are normalised means over the grid with the first vertex of each
    component pinned at angle 0. ``vertex_factors`` maps vertex -> array
    over the grid. Returns a list of (complex numerator, log partition).
    """
    t = TWO_PI * np.arange(grid) / grid
    active = J != 0
    eu, ev, J, omega = eu[active], ev[active], J[active], omega[active]
    out = []
    for comp in _components(n, eu, ev):
        root = comp[0]
        if len(comp) == 1:
            f = vertex_factors.get(root)
            out.append((complex(1.0 if f is None else f[0]), 0.0))
            continue
        members = set(comp)
        free = [v for v in comp if v != root]
        if len(free) > len(_LETTERS):
            raise SizeError("component too large for the quadrature oracle")
        letter = {v: _LETTERS[i] for i, v in enumerate(free)}
        ops, subs = [], []
        shift = 0.0
        for u, v, j, om in zip(eu.tolist(), ev.tolist(), J.tolist(), omega.tolist()):
            if u not in members:
                continue
            shift += j
            # weight exp(J (cos(t_u - t_v - omega) - 1)); the shift keeps it <= 1
            if u == root:
                ops.append(np.exp(j * (np.cos(-t - om) - 1.0)))
                subs.append(letter[v])
            elif v == root:
                ops.append(np.exp(j * (np.cos(t - om) - 1.0)))
                subs.append(letter[u])
            else:
                ops.append(np.exp(j * (np.cos(t[:, None] - t[None, :] - om) - 1.0)))
                subs.append(letter[u] + letter[v])
        num_ops, num_subs = list(ops), list(subs)
        scale = 1.0
        for v in comp:
            f = vertex_factors.get(v)
            if f is None:
                continue
            if v == root:
                scale *= f[0]
            else:
                num_ops.append(f)
                num_subs.append(letter[v])
        den_expr = ",".join(subs) + "->"
        num_expr = ",".join(num_subs) + "->"
        path, _ = np.einsum_path(num_expr, *num_ops, optimize="greedy")
        den_path, _ = np.einsum_path(den_expr, *ops, optimize="greedy")
        if max(_path_footprint(num_expr, path, grid), _path_footprint(den_expr, den_path, grid)) > max_elements:
            raise SizeError("quadrature contraction exceeds the size limit")
        den = float(np.einsum(den_expr, *ops, optimize=den_path)) / grid ** len(free)
        num = complex(np.einsum(num_expr, *num_ops, optimize=path)) * scale / grid ** len(free)
        out.append((num / den, math.log(den) + shift))
    return out


def _phase_array(graph, gauge):
    return np.zeros(graph.n_edges) if gauge is None else np.asarray(gauge.omega, dtype=float)


def xy_expectation_quadrature(
    graph: WeightedGraph,
    m,
    disorder=None,
    gauge=None,
    couplings=None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """<cos(sum_x m_x theta_x)> under the (disordered, gauged) XY measure."""
    m = np.asarray(m, dtype=np.int64)
    if m.shape != (graph.n_vertices,):
        raise ValueError("m must have one entry per vertex")
    J = effective_couplings(graph, disorder, couplings)
    om = _phase_array(graph, gauge)
    active = J != 0
    comps = _components(graph.n_vertices, graph.eu[active], graph.ev[active])
    for comp in comps:
        if int(m[comp].sum()) != 0:
            return 0.0
    t = TWO_PI * np.arange(quad.grid) / quad.grid
    factors = {int(v): np.exp(1j * int(m[v]) * t) for v in np.nonzero(m)[0]}
    parts = _contract(graph.n_vertices, graph.eu, graph.ev, J, om, factors, quad.grid, quad.max_elements)
    val = complex(1.0)
    for num, _ in parts:
        val *= num
    return float(val.real)


def xy_two_point(graph: WeightedGraph, x: int, y: int, **kw) -> float:
    m = np.zeros(graph.n_vertices, dtype=np.int64)
    if x == y:
        return 1.0
    m[x] += 1
    m[y] -= 1
    return xy_expectation_quadrature(graph, m, **kw)


def xy_log_partition(
    graph: WeightedGraph, disorder=None, gauge=None, couplings=None, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """log Z with each angle integrated against d theta / 2 pi."""
    J = effective_couplings(graph, disorder, couplings)
    om = _phase_array(graph, gauge)
    parts = _contract(graph.n_vertices, graph.eu, graph.ev, J, om, {}, quad.grid, quad.max_elements)
    return math.fsum(lz for _, lz in parts)


# ------------------------------------------- two-point inequalities


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    margin: float  # rhs - lhs for upper bounds, lhs - rhs for lower bounds


def inner_boundary(graph: WeightedGraph, H) -> np.ndarray:
    """Vertices of H with a neighbour outside H."""
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[np.asarray(list(H), dtype=np.int64)] = True
    hit = np.zeros(graph.n_vertices, dtype=bool)
    for a, b in ((graph.eu, graph.ev), (graph.ev, graph.eu)):
        m = inside[a] & ~inside[b]
        hit[a[m]] = True
    return np.nonzero(hit)[0]


def lieb_rivasseau_check(graph: WeightedGraph, x: int, y: int, H, quad: QuadratureSpec = DEFAULT_QUAD) -> InequalityCheck:
    """<cos(x-y)> against sum over z in the inner boundary of H of <cos(x-z)>_H <cos(z-y)>."""
    H = sorted(set(int(v) for v in H))
    if x not in H or y in H:
        raise DomainError("H must contain x and not y")
    sub, old = induced_subgraph(graph, H)
    local = {int(o): i for i, o in enumerate(old.tolist())}
    lhs = xy_two_point(graph, x, y, quad=quad)
    rhs = math.fsum(
        xy_two_point(sub, local[x], local[int(z)], quad=quad) * xy_two_point(graph, int(z), y, quad=quad)
        for z in inner_boundary(graph, H)
    )
    return InequalityCheck(lhs, rhs, rhs - lhs)


def reflect(graph: WeightedGraph, axis: int, twice_plane: int) -> np.ndarray:
    """Vertex permutation for coordinate ``axis`` mapped to twice_plane - c (in units of 1/denom).

    Raises DomainError unless the graph with its couplings is symmetric under the map.
    """
    c = graph.coords.copy()
    c[:, axis] = twice_plane - c[:, axis]
    idx = graph.index
    try:
        perm = np.array([idx[tuple(v)] for v in c.tolist()], dtype=np.int64)
    except KeyError:
        raise DomainError("vertex set is not symmetric under the reflection") from None
    ei = graph.edge_index
    for e, (u, v) in enumerate(zip(graph.eu.tolist(), graph.ev.tolist())):
        f = ei.get((int(perm[u]), int(perm[v])))
        if f is None or graph.coupling[f] != graph.coupling[e]:
            raise DomainError("couplings are not symmetric under the reflection")
    return perm


def mms_reflection_check(
    graph: WeightedGraph, axis: int, twice_plane: int, x: int, y: int, quad: QuadratureSpec = DEFAULT_QUAD
) -> InequalityCheck:
    """<cos(x-y)> >= <cos(x-P(y))> for x, y on the same closed side of the plane."""
    perm = reflect(graph, axis, twice_plane)
    sx = 2 * graph.coords[x, axis] - twice_plane
    sy = 2 * graph.coords[y, axis] - twice_plane
    if sx * sy < 0:
        raise DomainError("x and y lie on opposite sides of the plane")
    lhs = xy_two_point(graph, x, y, quad=quad)
    rhs = xy_two_point(graph, x, int(perm[y]), quad=quad)
    return InequalityCheck(lhs, rhs, lhs - rhs)


# ---------------------------------------------------------- domination


def p_zero(pbar: float, beta: float, d: int) -> float:
    """pbar / (pbar + (1 - pbar) e^{-2 d beta})."""
    if not 0.0 < pbar <= 1.0:
        raise DomainError("pbar must lie in (0, 1]")
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    return pbar / (pbar + (1.0 - pbar) * math.exp(-2.0 * d * beta))


class _SiteDisorder:
    """Minimal site-occupation view accepted by ``effective_couplings``."""

    class kind:  # noqa: N801
        value = "site"

    def __init__(self, occ):
        self.occupation = occ


@dataclass(frozen=True, eq=False)
class NuPrimeDistribution:
    configs: np.ndarray  # (2^N, N) uint8, row c has bit x of c at column x
    weights: np.ndarray
    log_z: np.ndarray
    beta: float
    pbar: float
    graph: WeightedGraph

    def probability(self, r) -> float:
        idx = int(sum(int(b) << i for i, b in enumerate(r)))
        return float(self.weights[idx])

    def conditional(self, x: int) -> np.ndarray:
        """nu'(r_x = 1 | rest) for every configuration of the other sites."""
        n = self.configs.shape[1]
        idx = np.arange(2**n)
        low = idx[(idx >> x) & 1 == 0]
        w0 = self.weights[low]
        w1 = self.weights[low | (1 << x)]
        return w1 / (w0 + w1)


def nu_prime_enumerate(
    graph: WeightedGraph, beta: float, pbar: float, quad: QuadratureSpec = DEFAULT_QUAD, max_sites: int = 12
) -> NuPrimeDistribution:
    """Weights proportional to P_pbar(r) Z_{beta, r} over all r in {0,1}^Lambda."""
    n = graph.n_vertices
    if n > max_sites:
        raise SizeError(f"{n} sites exceed the enumeration limit {max_sites}")
    if not 0.0 < pbar < 1.0:
        raise DomainError("pbar must lie in (0, 1)")
    J = np.full(graph.n_edges, float(beta))
    idx = np.arange(2**n)
    configs = ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.uint8)
    cache: dict[tuple, float] = {}
    log_z = np.empty(2**n)
    for c in range(2**n):
        occ = configs[c]
        open_edges = tuple(np.nonzero(occ[graph.eu] & occ[graph.ev])[0].tolist())
        if open_edges not in cache:
            cache[open_edges] = xy_log_partition(graph, _SiteDisorder(occ), couplings=J, quad=quad)
        log_z[c] = cache[open_edges]
    k = configs.sum(axis=1)
    logw = k * math.log(pbar) + (n - k) * math.log1p(-pbar) + log_z
    w = np.exp(logw - logw.max())
    w /= math.fsum(w.tolist())
    return NuPrimeDistribution(configs, w, log_z, float(beta), float(pbar), graph)


@dataclass(frozen=True)
class DominationResult:
    ok: bool
    max_conditional: float
    argmax: tuple[int, int]


def domination_check(nu: NuPrimeDistribution, p0: float, tol: float = 1e-12) -> DominationResult:
    best, arg = -1.0, (0, 0)
    for x in range(nu.configs.shape[1]):
        cond = nu.conditional(x)
        j = int(np.argmax(cond))
        if cond[j] > best:
            best, arg = float(cond[j]), (x, j)
    return DominationResult(best <= p0 + tol, best, arg)


# --------------------------------------------------------------- Wells


@dataclass(frozen=True)
class WellsCheck:
    ok: bool
    margin: float
    worst: tuple[int, int]


def _phi4_support(g: float, h: float) -> float:
    """Radius beyond which r e^{-g r^4 - h r^2} is below e^{-60} of its scale."""
    r = 1.0
    while g * r**4 + h * r**2 - math.log(r) < 60.0:
        r *= 1.25
    return r


@lru_cache(maxsize=64)
def _phi4_norm(g: float, h: float) -> tuple[float, float]:
    top = _phi4_support(g, h)
    z, err = integrate.quad(lambda r: r * math.exp(-g * r**4 - h * r**2), 0.0, top, limit=200, epsabs=0, epsrel=1e-13)
    return z, top


def wells_moment(kappa: SingleSiteMeasure, a: float, m: int, n: int) -> float:
    """int (r + a)^m (r - a)^n d kappa(r)."""
    if kappa.kind is MeasureKind.BERNOULLI_MIX:
        p = kappa.pbar
        return (-1) ** n * (1.0 - p) * a ** (m + n) + p * (1.0 + a) ** m * (1.0 - a) ** n
    if kappa.kind is MeasureKind.DIRAC:
        b = kappa.a
        return (b + a) ** m * (b - a) ** n
    g, h = kappa.g, kappa.h
    z, top = _phi4_norm(g, h)

    def f(r):
        return (r + a) ** m * (r - a) ** n * r * math.exp(-g * r**4 - h * r**2) / z

    pts = [a] if 0.0 < a < top else None
    val, err = integrate.quad(f, 0.0, top, points=pts, limit=400, epsabs=1e-15, epsrel=1e-12)
    scale, _ = integrate.quad(lambda r: abs(f(r)), 0.0, top, points=pts, limit=400, epsabs=1e-15, epsrel=1e-12)
    if err > 1e-10 * max(scale, 1e-300) and err > 1e-14:
        raise PrecisionError(f"moment quadrature did not converge (m={m}, n={n})")
    return val


def wells_condition_check(
    kappa: SingleSiteMeasure, a: float, m_max: int = 20, n_max: int = 20, total_max: int | None = None, tol: float = 1e-12
) -> WellsCheck:
    """All moments int (r+a)^m (r-a)^n d kappa >= -tol for m <= m_max, n <= n_max."""
    if a < 0:
        raise DomainError("a must be nonnegative")
    margin, worst = math.inf, (0, 0)
    for m in range(m_max + 1):
        for n in range(n_max, -1, -1):
            if total_max is not None and m + n > total_max:
                continue
            v = wells_moment(kappa, a, m, n)
            if v < margin:
                margin, worst = v, (m, n)
            if v < -tol:
                return WellsCheck(False, v, (m, n))
    return WellsCheck(True, margin, worst)


@lru_cache(maxsize=64)
def wells_a(kappa: SingleSiteMeasure, grid: int = 99, total_max: int = 40) -> float:
    """Largest certified a.

    Bernoulli mixtures use min(pbar, 1/2). Other measures scan the candidates
    a = eps delta / (eps + 1), eps, delta on a grid in (0, 1), from the
    largest down, and return the first that passes the moment check with
    m + n <= total_max.
    """
    if kappa.is_delta_zero():
        raise DomainError("kappa is the Dirac mass at 0")
    if kappa.kind is MeasureKind.BERNOULLI_MIX:
        return min(kappa.pbar, 0.5)
    vals = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    cands = sorted({round(e * d / (e + 1.0), 15) for e in vals for d in vals}, reverse=True)
    for a in cands:
        if wells_condition_check(kappa, a, total_max, total_max, total_max=total_max).ok:
            return float(a)
    raise PrecisionError("no candidate a passed the moment check")


@dataclass(frozen=True)
class WellsResult:
    lhs: float
    rhs: float
    holds: bool
    margin: float
    a: float


def verify_wells_inequality(
    graph: WeightedGraph, beta: float, pbar: float, m, quad: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-10
) -> WellsResult:
    """<cos(m theta)> at couplings a^2 beta versus E_{nu'}[<cos(m theta)>_{beta, r}]."""
    a = wells_a(SingleSiteMeasure.bernoulli(pbar))
    m = np.asarray(m, dtype=np.int64)
    lhs = xy_expectation_quadrature(graph, m, couplings=np.full(graph.n_edges, a * a * beta), quad=quad)
    nu = nu_prime_enumerate(graph, beta, pbar, quad)
    J = np.full(graph.n_edges, float(beta))
    terms = []
    for c in range(nu.configs.shape[0]):
        occ = nu.configs[c]
        if np.any(occ[m != 0] == 0):
            continue  # a closed site in supp m decouples: the expectation is 0
        terms.append(nu.weights[c] * xy_expectation_quadrature(graph, m, _SiteDisorder(occ), couplings=J, quad=quad))
    rhs = math.fsum(terms)
    return WellsResult(lhs, rhs, lhs <= rhs + tol, rhs - lhs, a)


# ------------------------------------------------------------- Phi^4


def _radial_nodes(g: float, h: float, count: int):
    top = _phi4_support(g, h)
    x, w = np.polynomial.legendre.leggauss(count)
    r = 0.5 * top * (x + 1.0)
    wr = 0.5 * top * w * r * np.exp(-g * r**4 - h * r**2)
    return r, wr


def phi4_expectation_quadrature(
    graph: WeightedGraph, beta: float, g: float, h: float, observable, quad: QuadratureSpec = DEFAULT_QUAD
) -> float:
    """mu^{Phi4}(S_x . S_y) for observable ("SS", x, y), or <|S_x|^2> for ("R2", x).

    Radii use Gauss-Legendre nodes on the effective support with the weight
    r e^{-g r^4 - h r^2} folded in. On forests the angles are integrated in
    closed form through I_0 and I_1; other graphs use a joint radial x angle grid.
    """
    if not g > 0:
        raise DomainError("g must be positive")
    if graph.n_vertices > 3:
        raise SizeError("Phi4 oracle handles at most 3 vertices")
    kind = observable[0]
    n = graph.n_vertices
    J = beta * graph.coupling
    is_forest = graph.n_edges == n - len(_components(n, graph.eu, graph.ev))
    if is_forest:
        return _phi4_forest(graph, J, g, h, observable, quad.radial_nodes)
    return _phi4_grid(graph, J, g, h, observable, min(quad.radial_nodes, 48), min(quad.grid, 32))


def _tree_path(graph: WeightedGraph, x: int, y: int) -> list[int] | None:
    import collections

    prev = {x: None}
    queue = collections.deque([x])
    while queue:
        u = queue.popleft()
        for v in graph.neighbours(u).tolist():
            if v not in prev:
                prev[v] = u
                queue.append(v)
    if y not in prev:
        return None
    path = []
    v = y
    while prev[v] is not None:
        path.append(graph.edge_index[(v, prev[v])])
        v = prev[v]
    return path


def _phi4_forest(graph, J, g, h, observable, count):
    r, wr = _radial_nodes(g, h, count)
    n = graph.n_vertices
    letters = _LETTERS[:n]
    kind = observable[0]
    path = []
    if kind == "SS":
        x, y = observable[1], observable[2]
        if x != y:
            path = _tree_path(graph, x, y)
            if path is None:
                return 0.0
    rr = np.outer(r, r)
    num_ops, den_ops, subs = [], [], []
    for e, (u, v) in enumerate(zip(graph.eu.tolist(), graph.ev.tolist())):
        z = J[e] * rr
        i0 = bessel_iv(0, z)
        den_ops.append(i0)
        num_ops.append(bessel_iv(1, z) if e in path else i0)
        subs.append(letters[u] + letters[v])
    vf_den = [wr] * n
    vf_num = [wr.copy() for _ in range(n)]
    if kind == "SS":
        x, y = observable[1], observable[2]
        if x == y:
            vf_num[x] = vf_num[x] * r**2
        else:
            vf_num[x] = vf_num[x] * r
            vf_num[y] = vf_num[y] * r
    elif kind == "R2":
        vf_num[observable[1]] = vf_num[observable[1]] * r**2
    else:
        raise ValueError(f"unknown observable {kind!r}")
    expr = ",".join(subs + list(letters)) + "->"
    num = np.einsum(expr, *num_ops, *vf_num, optimize="greedy")
    den = np.einsum(expr, *den_ops, *vf_den, optimize="greedy")
    return float(num / den)


def _phi4_grid(graph, J, g, h, observable, nr, nt):
    r, wr = _radial_nodes(g, h, nr)
    t = TWO_PI * np.arange(nt) / nt
    R = np.repeat(r, nt)
    T = np.tile(t, nr)
    W = np.repeat(wr, nt) / nt
    n = graph.n_vertices
    letters = _LETTERS[:n]
    ops, subs = [], []
    for e, (u, v) in enumerate(zip(graph.eu.tolist(), graph.ev.tolist())):
        ops.append(np.exp(J[e] * np.outer(R, R) * np.cos(T[:, None] - T[None, :])))
        subs.append(letters[u] + letters[v])
    kind = observable[0]
    vf_num = [W.astype(complex) for _ in range(n)]
    if kind == "SS":
        x, y = observable[1], observable[2]
        vf_num[x] = vf_num[x] * R * np.exp(1j * T)
        vf_num[y] = vf_num[y] * R * np.exp(-1j * T)
    elif kind == "R2":
        vf_num[observable[1]] = vf_num[observable[1]] * R**2
    expr = ",".join(subs + list(letters)) + "->"
    num = np.einsum(expr, *ops, *vf_num, optimize="greedy")
    den = np.einsum(expr, *ops, *[W] * n, optimize="greedy")
    return float((num / den).real)


def phi4_radial_moment_1d(g: float, h: float, power: int = 2) -> float:
    """int r^{power+1} e^{-g r^4 - h r^2} dr / int r e^{-g r^4 - h r^2} dr by adaptive quadrature."""
    num = integrate.quad(lambda r: r ** (power + 1) * math.exp(-g * r**4 - h * r**2), 0.0, np.inf, epsrel=1e-13)[0]
    den = integrate.quad(lambda r: r * math.exp(-g * r**4 - h * r**2), 0.0, np.inf, epsrel=1e-13)[0]
    return num / den


def all_pairs(n: int):
    return list(itertools.combinations(range(n), 2))
