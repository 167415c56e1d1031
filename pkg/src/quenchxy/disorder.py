"""Bernoulli percolation disorder and the box events built on it."""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import binomtest

from .errors import CoverageError, DomainError, UnsupportedError
from .graphs import LatticeBox, WeightedGraph, build_box_lattice
from .kernels import pregood_box, union_find_labels
from .rng import stream


class PercolationKind(Enum):
    SITE = "site"
    EDGE = "edge"


@dataclass(frozen=True, eq=False)
class PercolationSample:
    """Occupation bits indexed by vertex (site) or edge id, plus the graph they live on."""

    kind: PercolationKind
    occupation: np.ndarray
    p: float
    seed: int
    graph: WeightedGraph = field(repr=False)

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occupation, dtype=np.uint8)
        n = self.graph.n_vertices if self.kind is PercolationKind.SITE else self.graph.n_edges
        if occ.shape != (n,):
            raise ValueError("occupation length does not match the graph")
        occ.setflags(write=False)
        object.__setattr__(self, "occupation", occ)

    def open_edges(self) -> np.ndarray:
        """Per-edge indicator that the edge can carry interaction."""
        g = self.graph
        if self.kind is PercolationKind.SITE:
            return self.occupation[g.eu] & self.occupation[g.ev]
        return self.occupation.copy()

    def open_fraction(self) -> float:
        return float(self.occupation.mean()) if self.occupation.size else 0.0


def _kind(kind) -> PercolationKind:
    return kind if isinstance(kind, PercolationKind) else PercolationKind(str(kind).lower())


def sample_percolation(graph: WeightedGraph, kind, p: float, seed: int, index: int = 0) -> PercolationSample:
    """i.i.d. Bernoulli(p) occupation. Sites off Z^d (extended lattices) are always open."""
    kind = _kind(kind)
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    gen = stream(seed, "percolation-" + kind.value, index)
    if kind is PercolationKind.SITE:
        occ = (gen.random(graph.n_vertices) < p).astype(np.uint8)
        occ[~graph.lattice_mask] = 1
    else:
        occ = (gen.random(graph.n_edges) < p).astype(np.uint8)
    return PercolationSample(kind, occ, float(p), int(seed), graph)


def _grid_geometry(graph: WeightedGraph):
    """(lo, shape) for a full rectangular grid graph, else UnsupportedError."""
    if graph.meta.get("family") not in ("box", "rect") or graph.denom != 1:
        raise UnsupportedError("operation needs a box lattice")
    lo = graph.coords.min(axis=0)
    shape = tuple(int(s) for s in graph.meta["shape"])
    return lo, shape


def edge_from_site_coupling(graph: WeightedGraph, u: float, seed: int, index: int = 0):
    """Edge and site samples built from the same half-edge variables Z_{x,y}.

    Every vertex owns 2d half-edges; those pointing out of the box are
    still drawn, so each r_x is Bernoulli(u^{2d}) including on the boundary.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError("u must lie in [0, 1]")
    lo, shape = _grid_geometry(graph)
    d = len(shape)
    gen = stream(seed, "half-edges", index)
    z = (gen.random((graph.n_vertices, d, 2)) < u).astype(np.uint8)  # [..., 0] forward, [..., 1] backward
    diff = graph.coords[graph.ev] - graph.coords[graph.eu]
    axis = np.argmax(np.abs(diff), axis=1)
    fwd = diff[np.arange(graph.n_edges), axis] > 0
    zu = np.where(fwd, z[graph.eu, axis, 0], z[graph.eu, axis, 1])
    zv = np.where(fwd, z[graph.ev, axis, 1], z[graph.ev, axis, 0])
    omega = zu & zv
    r = np.all(z.reshape(graph.n_vertices, -1) == 1, axis=1).astype(np.uint8)
    return (
        PercolationSample(PercolationKind.EDGE, omega, u * u, int(seed), graph),
        PercolationSample(PercolationKind.SITE, r, u ** (2 * d), int(seed), graph),
    )


@dataclass(frozen=True, eq=False)
class ClusterLabels:
    labels: np.ndarray  # cluster id (smallest member) per vertex, -1 for closed sites
    diameters: dict[int, float]
    sizes: dict[int, int]

    def clusters(self) -> list[int]:
        return sorted(self.sizes)

    def same(self, x: int, y: int) -> bool:
        return self.labels[x] >= 0 and self.labels[x] == self.labels[y]


def label_clusters(graph: WeightedGraph, sample: PercolationSample) -> ClusterLabels:
    """Open clusters with their L-infinity diameters."""
    n = graph.n_vertices
    labels = union_find_labels(n, graph.eu, graph.ev, sample.open_edges().astype(np.uint8))
    if sample.kind is PercolationKind.SITE:
        labels = np.where(sample.occupation == 1, labels, -1)
    keep = labels >= 0
    roots, inv = np.unique(labels[keep], return_inverse=True)
    pts = graph.coords[keep]
    d = graph.dim
    lo = np.full((roots.size, d), np.iinfo(np.int64).max)
    hi = np.full((roots.size, d), np.iinfo(np.int64).min)
    np.minimum.at(lo, inv, pts)
    np.maximum.at(hi, inv, pts)
    span = (hi - lo).max(axis=1) if roots.size else np.zeros(0, dtype=np.int64)
    counts = np.bincount(inv, minlength=roots.size)
    scale = graph.denom
    diam = {int(r): (int(s) if scale == 1 else s / scale) for r, s in zip(roots.tolist(), span.tolist())}
    sizes = {int(r): int(c) for r, c in zip(roots.tolist(), counts.tolist())}
    labels = labels.astype(np.int64)
    labels.setflags(write=False)
    return ClusterLabels(labels, diam, sizes)


# ------------------------------------------------------------ good boxes


@dataclass(frozen=True)
class GoodBoxReport:
    box: LatticeBox
    preGood: bool
    good: bool
    crossingCluster: int | None
    maxOtherDiameter: int


DIAM_DIVISOR = 100


def _local(sample: PercolationSample):
    if sample.kind is not PercolationKind.SITE:
        raise UnsupportedError("box events are defined for site percolation")
    lo, shape = _grid_geometry(sample.graph)
    return lo, shape


def _pregood(sample, lo, shape, box: LatticeBox, divisor: int):
    rel = box.lo - lo
    if np.any(rel < 0) or np.any(rel + box.side > np.asarray(shape)):
        raise CoverageError(f"box {box} is not inside the sample window")
    return pregood_box(
        sample.occupation, np.asarray(shape, dtype=np.int64), rel.astype(np.int64), box.side, divisor
    )


def _subboxes(box: LatticeBox):
    """Boxes with half-width in [ceil(L/10), floor(L/2)] that intersect ``box``."""
    L = box.L
    c = np.asarray(box.center, dtype=np.int64)
    for half in range(max(1, math.ceil(L / 10)), L // 2 + 1):
        reach = L + half
        for off in np.ndindex(*([2 * reach + 1] * box.d)):
            yield LatticeBox(tuple((c + np.asarray(off) - reach).tolist()), half)


def classify_box(box: LatticeBox, sample: PercolationSample, divisor: int = DIAM_DIVISOR) -> GoodBoxReport:
    """Pre-good and good events of ``box``; the sample must cover 2 * box.

    ``divisor`` is the diameter fraction of the pre-good rule (100 by default).
    """
    lo, shape = _local(sample)
    outer = box.scaled(2)
    rel = outer.lo - lo
    if np.any(rel < 0) or np.any(rel + outer.side > np.asarray(shape)):
        raise CoverageError("the sample must cover the doubled box")
    ok, ncross, cross, other = _pregood(sample, lo, shape, box, divisor)
    crossing = None
    if ncross == 1:
        local = np.unravel_index(cross, (box.side,) * box.d)
        gcoord = tuple((box.lo + np.asarray(local)).tolist())
        crossing = sample.graph.index[gcoord]
    good = False
    if ok:
        good = all(_pregood(sample, lo, shape, sub, divisor)[0] for sub in _subboxes(box))
    return GoodBoxReport(box, bool(ok), bool(good), crossing, max(int(other), 0))


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def goodbox_scan(d: int, p: float, L_list, trials: int, seed: int, divisor: int = DIAM_DIVISOR) -> list[dict]:
    """Empirical P[preGood] and P[good] of the box Lambda_L at the origin."""
    if not 0.0 < p <= 1.0:
        raise DomainError("p must lie in (0, 1]")
    rows = []
    for L in L_list:
        graph = build_box_lattice(d, 2 * L, 1.0)
        box = LatticeBox((0,) * d, L)
        npre = ngood = 0
        for t in range(trials):
            s = sample_percolation(graph, "site", p, seed, index=t + (int(L) << 32))
            rep = classify_box(box, s, divisor)
            npre += rep.preGood
            ngood += rep.good
        plo, phi = wilson_interval(npre, trials)
        glo, ghi = wilson_interval(ngood, trials)
        rows.append(
            {
                "L": int(L),
                "trials": trials,
                "p_pregood": npre / trials,
                "pregood_lo": plo,
                "pregood_hi": phi,
                "p_good": ngood / trials,
                "good_lo": glo,
                "good_hi": ghi,
            }
        )
    return rows


# ------------------------------------------------------- paths and centers


def _bfs(sample: PercolationSample, start: int, allowed, target=None):
    """Predecessor map of a BFS over open sites satisfying ``allowed``.

    Neighbours are scanned in increasing id order, so the tree is unique.
    """
    g = sample.graph
    occ = sample.occupation
    indptr, indices, _, _ = g.csr
    prev = {start: -1}
    queue = collections.deque([start])
    while queue:
        x = queue.popleft()
        if x == target:
            break
        for y in indices[indptr[x] : indptr[x + 1]].tolist():
            if y in prev or not occ[y] or not allowed(y):
                continue
            prev[y] = x
            queue.append(y)
    return prev


def connect_centers(sample: PercolationSample, boxA: LatticeBox, boxB: LatticeBox, centerA: int, centerB: int):
    """Shortest open path from centerA to centerB inside boxA | boxB, or None."""
    if boxA.L != boxB.L:
        raise ValueError("boxes must have the same sidelength")
    if sample.kind is not PercolationKind.SITE:
        raise UnsupportedError("paths are defined for site percolation")
    coords = sample.graph.coords

    def allowed(y):
        c = coords[y]
        return boxA.contains(c) or boxB.contains(c)

    if not (sample.occupation[centerA] and sample.occupation[centerB]):
        return None
    if not (allowed(centerA) and allowed(centerB)):
        raise ValueError("centers must lie in the union of the boxes")
    prev = _bfs(sample, centerA, allowed, target=centerB)
    if centerB not in prev:
        return None
    path = [centerB]
    while prev[path[-1]] != -1:
        path.append(prev[path[-1]])
    return path[::-1]


def select_center(sample: PercolationSample, report: GoodBoxReport) -> int | None:
    """Vertex of the crossing cluster closest (L-inf, then id) to the box center."""
    if report.crossingCluster is None:
        return None
    box = report.box
    prev = _bfs(sample, report.crossingCluster, lambda y: box.contains(sample.graph.coords[y]))
    members = np.array(sorted(prev))
    dist = np.abs(sample.graph.coords[members] - np.asarray(box.center)).max(axis=1)
    return int(members[np.argmin(dist)])


def event_E(sample: PercolationSample, x: int, L: int) -> bool:
    """x is open and its open cluster inside x + Lambda_{L/2} reaches the box boundary."""
    if not sample.occupation[x]:
        return False
    coords = sample.graph.coords
    c = coords[x]
    half = L // 2
    lo, shape = _grid_geometry(sample.graph)
    if np.any(c - half < lo) or np.any(c + half >= lo + np.asarray(shape)):
        raise CoverageError("x + Lambda_{L/2} is not inside the sample window")
    prev = _bfs(sample, x, lambda y: np.abs(coords[y] - c).max() <= half)
    return any(np.abs(coords[y] - c).max() == half for y in prev)


def adjacent_good_pairs(sample: PercolationSample, L0: int, divisor: int = DIAM_DIVISOR):
    """Classify the tiling boxes z + Lambda_L0 whose doubles fit, and join centers of adjacent good pairs.

    Returns (pairs found, pairs connected, list of path lengths).
    """
    lo, shape = _local(sample)
    d = len(shape)
    pitch = 2 * L0 + 1
    hi = lo + np.asarray(shape) - 1
    first = -((-(lo + 2 * L0)) // pitch)
    last = (hi - 2 * L0) // pitch
    if np.any(last < first):
        return 0, 0, []
    reports = {}
    for idx in np.ndindex(*(last - first + 1).tolist()):
        z = tuple(((first + np.asarray(idx)) * pitch).tolist())
        reports[z] = classify_box(LatticeBox(z, L0), sample, divisor)
    found = connected = 0
    lengths = []
    for z, rep in sorted(reports.items()):
        if not rep.good:
            continue
        for k in range(d):
            w = list(z)
            w[k] += pitch
            other = reports.get(tuple(w))
            if other is None or not other.good:
                continue
            found += 1
            path = connect_centers(sample, rep.box, other.box, select_center(sample, rep), select_center(sample, other))
            if path is not None:
                connected += 1
                lengths.append(len(path) - 1)
    return found, connected, lengths
