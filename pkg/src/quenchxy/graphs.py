"""Deterministic graph families.

Coordinates are integer numerators over a common denominator, so tests
such as "x lies in Z^d" are exact. Vertex ids follow the lexicographic
order of coordinates.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import PartitionError, SizeError, TopologyError, UnsupportedError

MAX_VERTICES = 2**31 - 1


class EdgeClass(IntEnum):
    GENERIC = 0
    BETA1 = 1
    BETA2 = 2


class DualType(IntEnum):
    TYPE1 = 1
    TYPE2 = 2


@dataclass(frozen=True)
class LatticeBox:
    """``center + {-L..L}^d``."""

    center: tuple[int, ...]
    L: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        if self.L < 0:
            raise ValueError("L must be nonnegative")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.center, dtype=np.int64) - self.L

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.center, dtype=np.int64) + self.L

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def cardinality(self) -> int:
        return self.side**self.d

    def scaled(self, k: int) -> LatticeBox:
        return LatticeBox(self.center, k * self.L)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(np.abs(x - np.array(self.center)) <= self.L))

    def intersects(self, other: LatticeBox) -> bool:
        return bool(np.all(np.abs(np.array(self.center) - np.array(other.center)) <= self.L + other.L))


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Immutable graph with per-edge coupling and class tag.

    ``coords[i] / denom`` is the position of vertex ``i``.
    """

    coords: np.ndarray
    denom: int
    eu: np.ndarray
    ev: np.ndarray
    coupling: np.ndarray
    edge_class: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.int64)
        if coords.ndim != 2:
            raise ValueError("coords must be (N, d)")
        eu = np.ascontiguousarray(self.eu, dtype=np.int64)
        ev = np.ascontiguousarray(self.ev, dtype=np.int64)
        coupling = np.ascontiguousarray(self.coupling, dtype=np.float64)
        cls = np.ascontiguousarray(self.edge_class, dtype=np.int8)
        n = coords.shape[0]
        if not (eu.shape == ev.shape == coupling.shape == cls.shape):
            raise ValueError("edge arrays must have equal length")
        if eu.size:
            if eu.min() < 0 or ev.min() < 0 or eu.max() >= n or ev.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(eu == ev):
                raise ValueError("self-loop")
            key = np.minimum(eu, ev) * n + np.maximum(eu, ev)
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edge")
        if np.any(~(coupling >= 0)):
            raise ValueError("couplings must be nonnegative")
        for name, arr in (("coords", coords), ("eu", eu), ("ev", ev), ("coupling", coupling), ("edge_class", cls)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.eu.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @cached_property
    def lattice_mask(self) -> np.ndarray:
        """Vertices lying in Z^d."""
        return np.all(self.coords % self.denom == 0, axis=1)

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(c): i for i, c in enumerate(self.coords.tolist())}

    def vertex_id(self, x, denom: int = 1) -> int:
        """Id of the vertex at ``x / denom``."""
        scale = self.denom // denom if self.denom % denom == 0 else None
        if scale is None:
            raise KeyError(x)
        return self.index[tuple(int(v) * scale for v in x)]

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        out = {}
        for e, (u, v) in enumerate(zip(self.eu.tolist(), self.ev.tolist())):
            out[(u, v)] = e
            out[(v, u)] = e
        return out

    @cached_property
    def csr(self):
        """(indptr, indices, edge id, orientation) of directed adjacency.

        Orientation is +1 when the slot's owner is the edge's ``u``.
        """
        n = self.n_vertices
        src = np.concatenate([self.eu, self.ev])
        dst = np.concatenate([self.ev, self.eu])
        eid = np.concatenate([np.arange(self.n_edges), np.arange(self.n_edges)])
        sign = np.concatenate([np.ones(self.n_edges), -np.ones(self.n_edges)])
        order = np.lexsort((dst, src))
        src, dst, eid, sign = src[order], dst[order], eid[order], sign[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return indptr, dst.astype(np.int64), eid.astype(np.int64), sign

    def degree(self) -> np.ndarray:
        indptr = self.csr[0]
        return np.diff(indptr)

    def neighbours(self, x: int) -> np.ndarray:
        indptr, indices, _, _ = self.csr
        return indices[indptr[x] : indptr[x + 1]]

    def with_couplings(self, coupling) -> WeightedGraph:
        return WeightedGraph(self.coords, self.denom, self.eu, self.ev, coupling, self.edge_class, dict(self.meta))

    def components(self) -> np.ndarray:
        from .kernels import union_find_labels

        return union_find_labels(self.n_vertices, self.eu, self.ev, np.ones(self.n_edges, dtype=np.uint8))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "coupling", "class"])
            for u, v, c, k in zip(self.eu.tolist(), self.ev.tolist(), self.coupling.tolist(), self.edge_class.tolist()):
                w.writerow([u, v, repr(c), EdgeClass(k).name])


def induced_subgraph(graph: WeightedGraph, vertices) -> tuple[WeightedGraph, np.ndarray]:
    """Subgraph on ``vertices`` with every edge between them; returns it and the old ids."""
    keep = np.unique(np.asarray(vertices, dtype=np.int64))
    new = np.full(graph.n_vertices, -1, dtype=np.int64)
    new[keep] = np.arange(keep.size)
    e = (new[graph.eu] >= 0) & (new[graph.ev] >= 0)
    sub = WeightedGraph(
        graph.coords[keep], graph.denom, new[graph.eu[e]], new[graph.ev[e]],
        graph.coupling[e], graph.edge_class[e], dict(graph.meta),
    )
    return sub, keep


def read_graph_csv(path, coords, denom: int = 1) -> WeightedGraph:
    eu, ev, cp, cl = [], [], [], []
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            eu.append(int(row["u"]))
            ev.append(int(row["v"]))
            cp.append(float(row["coupling"]))
            cl.append(EdgeClass[row["class"]].value)
    return WeightedGraph(np.asarray(coords), denom, np.array(eu), np.array(ev), np.array(cp), np.array(cl))


def _check_size(count: int) -> None:
    if count > MAX_VERTICES:
        raise SizeError(f"{count} vertices exceed the addressable range")


def _grid(lo, shape, scale: int = 1):
    """Row-major grid coordinates and the nearest-neighbour edges between them."""
    shape = tuple(int(s) for s in shape)
    d = len(shape)
    total = 1
    for s in shape:
        total *= s
    _check_size(total)
    idx = np.indices(shape).reshape(d, -1).T
    coords = (idx + np.asarray(lo, dtype=np.int64)) * scale
    ids = np.arange(total).reshape(shape)
    eu, ev = [], []
    for k in range(d):
        a = np.take(ids, np.arange(shape[k] - 1), axis=k).ravel()
        b = np.take(ids, np.arange(1, shape[k]), axis=k).ravel()
        eu.append(a)
        ev.append(b)
    eu = np.concatenate(eu) if eu else np.zeros(0, dtype=np.int64)
    ev = np.concatenate(ev) if ev else np.zeros(0, dtype=np.int64)
    order = np.lexsort((ev, eu))
    return coords, eu[order], ev[order]


def build_box_lattice(d: int, L: int, beta: float, center=None) -> WeightedGraph:
    """Free-boundary nearest-neighbour box ``center + {-L..L}^d``."""
    if d < 1 or L < 0:
        raise ValueError("need d >= 1 and L >= 0")
    _check_size((2 * L + 1) ** d)
    center = np.zeros(d, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
    coords, eu, ev = _grid(center - L, (2 * L + 1,) * d)
    m = eu.size
    return WeightedGraph(
        coords,
        1,
        eu,
        ev,
        np.full(m, float(beta)),
        np.full(m, EdgeClass.GENERIC, dtype=np.int8),
        {"family": "box", "box": LatticeBox(tuple(center), L), "shape": (2 * L + 1,) * d},
    )


def build_rect_lattice(shape, beta: float, lo=None) -> WeightedGraph:
    """Free-boundary rectangle ``lo + prod_k {0..shape_k - 1}``; a 1x2 shape is one edge."""
    shape = tuple(int(s) for s in shape)
    if not shape or min(shape) < 1:
        raise ValueError("shape entries must be positive")
    lo = np.zeros(len(shape), dtype=np.int64) if lo is None else np.asarray(lo, dtype=np.int64)
    coords, eu, ev = _grid(lo, shape)
    m = eu.size
    return WeightedGraph(
        coords,
        1,
        eu,
        ev,
        np.full(m, float(beta)),
        np.full(m, EdgeClass.GENERIC, dtype=np.int8),
        {"family": "rect", "shape": shape, "lo": tuple(lo.tolist())},
    )


def _assemble(points: set, segments: list, denom: int, meta: dict) -> WeightedGraph:
    """Sort coordinates lexicographically and translate segment endpoints to ids."""
    coords = np.array(sorted(points), dtype=np.int64)
    _check_size(coords.shape[0])
    index = {tuple(c): i for i, c in enumerate(coords.tolist())}
    eu = np.empty(len(segments), dtype=np.int64)
    ev = np.empty(len(segments), dtype=np.int64)
    cp = np.empty(len(segments))
    cl = np.empty(len(segments), dtype=np.int8)
    for e, (a, b, c, k) in enumerate(segments):
        i, j = index[a], index[b]
        eu[e], ev[e] = min(i, j), max(i, j)
        cp[e], cl[e] = c, k
    order = np.lexsort((ev, eu))
    return WeightedGraph(coords, denom, eu[order], ev[order], cp[order], cl[order], meta)


def _subdivided_sides(L: int, d: int, n: int, scale: int, step: int, beta1: float, beta2: float):
    """Lattice edges of the box, each cut into n+1 segments."""
    points = set()
    segments = []
    rng = range(-L, L + 1)
    for x in itertools.product(rng, repeat=d):
        base = tuple(c * scale for c in x)
        points.add(base)
        for k in range(d):
            if x[k] == L:
                continue
            chain = []
            for j in range(n + 2):
                p = list(base)
                p[k] += j * step
                chain.append(tuple(p))
            points.update(chain)
            for j in range(n + 1):
                lattice_end = j == 0 or j + 1 == n + 1
                cls = EdgeClass.BETA1 if lattice_end else EdgeClass.BETA2
                segments.append((chain[j], chain[j + 1], beta1 if lattice_end else beta2, cls))
    return points, segments


def build_extended_lattice(d: int, L: int, n: int, beta1: float, beta2: float) -> WeightedGraph:
    """Box of Z^d with n vertices inserted on every edge.

    End segments (touching Z^d) carry ``beta1``, interior ones ``beta2``.
    """
    if n < 0 or beta1 < 0 or beta2 < 0:
        raise ValueError("need n >= 0 and nonnegative couplings")
    _check_size((2 * L + 1) ** d * (1 + d * n))
    points, segments = _subdivided_sides(L, d, n, n + 1, 1, beta1, beta2)
    return _assemble(
        points, segments, n + 1, {"family": "extended", "L": L, "n": n, "d": d, "beta1": beta1, "beta2": beta2}
    )


def build_extended_triangulation(L: int, n: int, beta1: float, beta2: float, d: int = 2) -> WeightedGraph:
    """Extended square lattice plus subdivided top-left to bottom-right diagonals.

    Each diagonal carries 2n+1 inserted vertices. A segment is Beta1 iff an
    endpoint lies in Z^2 or in (1/2,1/2)+Z^2.
    """
    if d != 2:
        raise UnsupportedError("the triangulation exists in d = 2 only")
    if n < 0 or L < 1:
        raise ValueError("need n >= 0 and L >= 1")
    D = 2 * (n + 1)
    points, segments = _subdivided_sides(L, 2, n, D, 2, beta1, beta2)
    half = D // 2

    def special(p):
        a, b = p[0] % D, p[1] % D
        return (a == 0 and b == 0) or (a == half and b == half)

    for i in range(-L, L):
        for j in range(-L, L):
            chain = [(i * D + t, (j + 1) * D - t) for t in range(D + 1)]
            points.update(chain)
            for t in range(D):
                b1 = special(chain[t]) or special(chain[t + 1])
                segments.append(
                    (chain[t], chain[t + 1], beta1 if b1 else beta2, EdgeClass.BETA1 if b1 else EdgeClass.BETA2)
                )
    return _assemble(
        points, segments, D, {"family": "triangulation", "L": L, "n": n, "d": 2, "beta1": beta1, "beta2": beta2}
    )


@dataclass(frozen=True)
class Face:
    id: int
    square: tuple[int, int]
    kind: str  # "lower" (contains the square's lower-left corner) or "upper"
    edges: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DualGraph:
    faces: tuple[Face, ...]
    du: np.ndarray
    dv: np.ndarray
    dtype_: np.ndarray
    root: int
    n: int
    L: int

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def face_index(self) -> dict:
        return {(f.square, f.kind): f.id for f in self.faces}

    @cached_property
    def csr(self):
        m = self.n_faces
        src = np.concatenate([self.du, self.dv])
        dst = np.concatenate([self.dv, self.du])
        typ = np.concatenate([self.dtype_, self.dtype_])
        order = np.lexsort((dst, src))
        src, dst, typ = src[order], dst[order], typ[order]
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst.astype(np.int64), typ.astype(np.int64)

    def neighbours(self, f: int) -> np.ndarray:
        indptr, indices, _ = self.csr
        return indices[indptr[f] : indptr[f + 1]]

    def distances(self, source: int | None = None) -> np.ndarray:
        """Dual-graph BFS distance from ``source`` (default: the root face)."""
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import shortest_path

        indptr, indices, _ = self.csr
        m = self.n_faces
        adj = csr_matrix((np.ones(indices.size), indices, indptr), shape=(m, m))
        src = self.root if source is None else source
        return shortest_path(adj, unweighted=True, indices=src).astype(np.int64)


def build_dual_graph(tri: WeightedGraph) -> DualGraph:
    """Faces of the triangulation as vertices; dual edges typed by shared primal edges."""
    if tri.meta.get("family") != "triangulation":
        raise TopologyError("input is not an extended triangulation")
    L, n = tri.meta["L"], tri.meta["n"]
    D = tri.denom
    step = D // (n + 1)

    def side(a, b):
        """Edge ids along the straight primal path from a to b (numerator coords)."""
        a = np.array(a)
        b = np.array(b)
        delta = b - a
        steps = int(np.max(np.abs(delta)))
        count = steps // step if delta[0] == 0 or delta[1] == 0 else steps
        inc = delta // count
        ids = []
        for t in range(count):
            p = tuple((a + t * inc).tolist())
            q = tuple((a + (t + 1) * inc).tolist())
            try:
                ids.append(tri.edge_index[(tri.index[p], tri.index[q])])
            except KeyError as exc:
                raise TopologyError(f"missing primal segment {p}-{q}") from exc
        return ids

    faces = []
    for i in range(-L, L):
        for j in range(-L, L):
            ll = (i * D, j * D)
            lr = ((i + 1) * D, j * D)
            ul = (i * D, (j + 1) * D)
            ur = ((i + 1) * D, (j + 1) * D)
            diag = side(ul, lr)
            lower = side(ll, lr) + side(ll, ul) + diag
            upper = side(ul, ur) + side(lr, ur) + diag
            faces.append(Face(len(faces), (i, j), "lower", tuple(sorted(lower))))
            faces.append(Face(len(faces), (i, j), "upper", tuple(sorted(upper))))
    owners: dict[int, list[int]] = {}
    for f in faces:
        for e in f.edges:
            owners.setdefault(e, []).append(f.id)
    shared: dict[tuple[int, int], int] = {}
    for e, fs in owners.items():
        if len(fs) > 2:
            raise TopologyError(f"primal edge {e} on {len(fs)} faces")
        if len(fs) == 2:
            key = (min(fs), max(fs))
            shared[key] = shared.get(key, 0) + 1
    du, dv, dt = [], [], []
    for (a, b), c in sorted(shared.items()):
        if c == n + 1:
            t = DualType.TYPE1
        elif c == 2 * n + 2:
            t = DualType.TYPE2
        else:
            raise TopologyError(f"faces {a},{b} share {c} primal edges")
        du.append(a)
        dv.append(b)
        dt.append(t)
    root = next(f.id for f in faces if f.square == (0, 0) and f.kind == "lower")
    return DualGraph(
        tuple(faces),
        np.array(du, dtype=np.int64),
        np.array(dv, dtype=np.int64),
        np.array(dt, dtype=np.int64),
        root,
        n,
        L,
    )


def build_renormalized_graph(region, L0: int) -> WeightedGraph:
    """Graph of the sub-boxes ``z + Lambda_L0``, z in (2 L0 + 1) Z^d, tiling ``region``.

    ``region`` is a LatticeBox or a pair (lo, hi) of inclusive integer corners.
    """
    if L0 < 0:
        raise ValueError("L0 must be nonnegative")
    if isinstance(region, LatticeBox):
        lo, hi = region.lo, region.hi
    else:
        lo, hi = (np.asarray(v, dtype=np.int64) for v in region)
    pitch = 2 * L0 + 1
    span = hi - lo + 1
    if np.any(span <= 0) or np.any(span % pitch) or np.any((lo + L0) % pitch):
        raise PartitionError("region is not tiled by translates z + Lambda_L0 with z in (2 L0 + 1) Z^d")
    counts = span // pitch
    first = (lo + L0) // pitch
    coords, eu, ev = _grid(first, counts, scale=pitch)
    m = eu.size
    boxes = [LatticeBox(tuple(c), L0) for c in coords.tolist()]
    return WeightedGraph(
        coords,
        1,
        eu,
        ev,
        np.ones(m),
        np.zeros(m, dtype=np.int8),
        {"family": "renormalized", "L0": L0, "boxes": boxes},
    )
