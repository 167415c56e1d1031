"""Poisson-Voronoi geometry in the plane: cells, facets, couplings and local events.

The diagram itself comes from Qhull (``scipy.spatial``). Everything measured
on it (clipped facets, cell polygons, areas, covering radii) is computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.spatial import QhullError, Voronoi, cKDTree

from .errors import CoverageError, DegenerateInputError, DomainError
from .graphs import EdgeClass, WeightedGraph
from .rng import stream


class Strength(Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"


def default_f(v):
    return 1.0 - np.exp(-np.asarray(v, dtype=float))


@dataclass(frozen=True)
class Window:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @classmethod
    def of(cls, w) -> Window:
        return w if isinstance(w, Window) else cls(*(float(v) for v in w))

    @classmethod
    def square(cls, center, half: float) -> Window:
        cx, cy = center
        return cls(cx - half, cy - half, cx + half, cy + half)

    @property
    def area(self) -> float:
        return max(self.xmax - self.xmin, 0.0) * max(self.ymax - self.ymin, 0.0)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    def corners(self) -> np.ndarray:
        return np.array(
            [[self.xmin, self.ymin], [self.xmax, self.ymin], [self.xmax, self.ymax], [self.xmin, self.ymax]]
        )

    def contains(self, other: Window) -> bool:
        return (
            self.xmin <= other.xmin and self.ymin <= other.ymin and self.xmax >= other.xmax and self.ymax >= other.ymax
        )


def sample_poisson_points(window, seed: int, intensity: float = 1.0, index: int = 0) -> np.ndarray:
    """Poisson point process restricted to ``window``."""
    w = Window.of(window)
    if intensity < 0:
        raise DomainError("intensity must be nonnegative")
    gen = stream(seed, "poisson", index)
    count = gen.poisson(intensity * w.area)
    pts = np.empty((count, 2))
    pts[:, 0] = w.xmin + (w.xmax - w.xmin) * gen.random(count)
    pts[:, 1] = w.ymin + (w.ymax - w.ymin) * gen.random(count)
    return pts


# ------------------------------------------------------------- clipping


def clip_segment(p0, p1, w: Window, t0: float = 0.0, t1: float = 1.0):
    """Liang-Barsky clip of p0 + t (p1 - p0), t in [t0, t1]; returns (t0, t1) or None.

    ``t1`` may be ``inf`` for rays.
    """
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for p, q in ((-dx, p0[0] - w.xmin), (dx, w.xmax - p0[0]), (-dy, p0[1] - w.ymin), (dy, w.ymax - p0[1])):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return t0, t1


def clip_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Sutherland-Hodgman step keeping {x : normal . x <= offset}."""
    if poly.shape[0] == 0:
        return poly
    s = poly @ np.asarray(normal) - offset
    out = []
    n = poly.shape[0]
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        sa, sb = s[k], s[(k + 1) % n]
        if sa <= 0.0:
            out.append(a)
        if (sa < 0.0 < sb) or (sb < 0.0 < sa):
            out.append(a + (b - a) * (sa / (sa - sb)))
    return np.array(out) if out else np.zeros((0, 2))


def polygon_area(poly: np.ndarray) -> float:
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(math.fsum((x * np.roll(y, -1) - np.roll(x, -1) * y).tolist()))


def _cell(points, i, neighbours, w: Window) -> np.ndarray:
    poly = w.corners()
    p = points[i]
    for j in neighbours:
        q = points[j]
        normal = q - p
        poly = clip_halfplane(poly, normal, float(normal @ (0.5 * (p + q))))
    return poly


# -------------------------------------------------------------- diagram


@dataclass(frozen=True, eq=False)
class VoronoiGraph:
    points: np.ndarray
    window: Window
    cells: list
    areas: np.ndarray
    adjacency: list  # (i, j, facet length), i < j
    multipliers: np.ndarray
    strength: Strength

    def edges(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, _ in self.adjacency}

    def neighbours(self, i: int) -> list[int]:
        return sorted({j for a, b, _ in self.adjacency for j in ((b,) if a == i else (a,) if b == i else ())})

    def as_graph(self, beta: float = 1.0) -> WeightedGraph:
        """Coupling graph with beta times the strength multipliers; vertex coordinates are point indices."""
        n = self.points.shape[0]
        eu = np.array([a for a, _, _ in self.adjacency], dtype=np.int64)
        ev = np.array([b for _, b, _ in self.adjacency], dtype=np.int64)
        return WeightedGraph(
            np.arange(n, dtype=np.int64)[:, None],
            1,
            eu,
            ev,
            beta * self.multipliers,
            np.full(eu.size, EdgeClass.GENERIC, dtype=np.int8),
            {"family": "voronoi"},
        )


def clip_segments(a: np.ndarray, b: np.ndarray, w: Window):
    """Vectorised Liang-Barsky: (keep mask, clipped starts, clipped ends) for segments a -> b."""
    d = b - a
    t0 = np.zeros(a.shape[0])
    t1 = np.ones(a.shape[0])
    keep = np.ones(a.shape[0], dtype=bool)
    for p, q in ((-d[:, 0], a[:, 0] - w.xmin), (d[:, 0], w.xmax - a[:, 0]), (-d[:, 1], a[:, 1] - w.ymin), (d[:, 1], w.ymax - a[:, 1])):
        zero = p == 0.0
        keep &= ~(zero & (q < 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(zero, 0.0, q / np.where(zero, 1.0, p))
        t0 = np.where(p < 0.0, np.maximum(t0, r), t0)
        t1 = np.where(p > 0.0, np.minimum(t1, r), t1)
    keep &= t0 <= t1
    return keep, a + t0[:, None] * d, a + t1[:, None] * d


def _qhull(points: np.ndarray):
    if points.shape[0] < 3:
        return None
    try:
        return Voronoi(points)
    except QhullError:
        return None


def _ridge_arrays(points: np.ndarray, w: Window, vor):
    """(site pairs, clipped starts, clipped ends) of the Qhull ridges meeting ``w``."""
    rp = np.sort(vor.ridge_points, axis=1)
    rv = np.asarray(vor.ridge_vertices, dtype=np.int64)
    finite = np.all(rv >= 0, axis=1)
    start = vor.vertices[np.max(rv, axis=1)]
    end = vor.vertices[np.where(finite, np.min(rv, axis=1), 0)]
    # rays leave the finite vertex away from the cloud, perpendicular to p -> q
    center = points.mean(axis=0)
    span = max(w.diagonal, float(np.ptp(points, axis=0).max())) * 4.0 + 1.0
    inf = ~finite
    if np.any(inf):
        p, q = points[rp[inf, 0]], points[rp[inf, 1]]
        t = q - p
        nrm = np.column_stack([-t[:, 1], t[:, 0]])
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        mid = 0.5 * (p + q)
        flip = np.einsum("ij,ij->i", mid - center, nrm) < 0
        nrm[flip] *= -1.0
        s = start[inf]
        reach = span + np.linalg.norm(s - center, axis=1)
        end[inf] = s + nrm * reach[:, None]
    keep, a, b = clip_segments(start, end, w)
    return rp[keep], a[keep], b[keep]


def _ridges(points: np.ndarray, w: Window, vor=None):
    """Clipped Voronoi ridges as {(i, j): (segment start, segment end)} from Qhull.

    Degenerate inputs that Qhull rejects (fewer than 3 points, collinear sets)
    fall back to the exact pairwise computation.
    """
    vor = _qhull(points) if vor is None else vor
    if vor is None:
        return _ridges_pairwise(points, w)
    rp, a, b = _ridge_arrays(points, w, vor)
    return {(int(i), int(j)): (a[k], b[k]) for k, (i, j) in enumerate(rp.tolist())}


def bisector_facets(points: np.ndarray, w: Window, pairs=None) -> dict:
    """Exact facets of the clipped diagram from 1-D interval intersection on each bisector.

    For a pair (i, j), the bisector is parametrised as mid + s * dir; every
    other site k cuts it to a half-line, the window to an interval. Costs
    O(n) per pair with no reliance on a global diagram.
    """
    n = points.shape[0]
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    out = {}
    for i, j in pairs:
        p, q = points[i], points[j]
        mid = 0.5 * (p + q)
        t = q - p
        dirv = np.array([-t[1], t[0]])
        # window interval
        big = w.diagonal + float(np.linalg.norm(mid - np.array([w.xmin, w.ymin]))) + 1.0
        dn = dirv / np.linalg.norm(dirv)
        seg = clip_segment(mid - big * dn, mid + big * dn, w)
        if seg is None:
            continue
        lo, hi = -big + 2 * big * seg[0], -big + 2 * big * seg[1]
        others = np.delete(np.arange(n), [i, j])
        if others.size:
            # |x - p|^2 <= |x - k|^2  <=>  2 (k - p) . x <= |k|^2 - |p|^2
            kk = points[others]
            a = 2.0 * (kk - p) @ dn
            b = (kk * kk).sum(axis=1) - p @ p - 2.0 * (kk - p) @ mid
            pos = a > 0
            neg = a < 0
            if np.any(pos):
                hi = min(hi, float(np.min(b[pos] / a[pos])))
            if np.any(neg):
                lo = max(lo, float(np.max(b[neg] / a[neg])))
            if np.any((a == 0) & (b < 0)):
                continue
        if hi > lo:
            out[(i, j)] = (mid + lo * dn, mid + hi * dn)
    return out


def _ridges_pairwise(points, w):
    return bisector_facets(points, w)


def _cells(pts: np.ndarray, w: Window, vor, ridges) -> list:
    """Cell polygons clipped to ``w``.

    Bounded Qhull regions lying inside the window are used as they are,
    ordered by angle around their site; every other cell is cut out of the
    window by the bisectors with all of its Delaunay neighbours.
    """
    n = pts.shape[0]
    nbrs: list[list[int]] = [[] for _ in range(n)]
    pairs = vor.ridge_points.tolist() if vor is not None else list(ridges)
    for i, j in pairs:
        nbrs[i].append(j)
        nbrs[j].append(i)
    v = vor.vertices if vor is not None else None
    if v is not None:
        vin = (v[:, 0] >= w.xmin) & (v[:, 0] <= w.xmax) & (v[:, 1] >= w.ymin) & (v[:, 1] <= w.ymax)
    cells = []
    for i in range(n):
        reg = vor.regions[vor.point_region[i]] if vor is not None else []
        if reg and -1 not in reg and vin[reg].all():
            poly = v[reg]
            ang = np.arctan2(poly[:, 1] - pts[i, 1], poly[:, 0] - pts[i, 0])
            cells.append(poly[np.argsort(ang)])
        else:
            cells.append(_cell(pts, i, sorted(nbrs[i]), w))
    return cells


def build_voronoi_graph(points, window, strength="F1", f: Callable | None = None) -> VoronoiGraph:
    """Voronoi cells clipped to ``window`` and the coupling multiplier of every adjacent pair."""
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (N, 2) array")
    if pts.shape[0] < 2:
        raise DegenerateInputError("need at least two points")
    if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
        raise DegenerateInputError("duplicate points")
    w = Window.of(window)
    strength = strength if isinstance(strength, Strength) else Strength(str(strength).upper())
    f = default_f if f is None else f
    tol = 1e-12 * w.diagonal
    vor = _qhull(pts)
    ridges = _ridges(pts, w, vor)
    adjacency = []
    for (i, j), (a, b) in sorted(ridges.items()):
        length = float(np.linalg.norm(b - a))
        if length > tol:
            adjacency.append((i, j, length))
    cells = _cells(pts, w, vor, ridges)
    areas = np.array([polygon_area(c) for c in cells])
    if strength is Strength.F1:
        mult = np.ones(len(adjacency))
    elif strength is Strength.F2:
        fa = np.asarray(f(areas), dtype=float)
        mult = np.array([fa[i] * fa[j] for i, j, _ in adjacency])
    else:
        mult = np.array([length for _, _, length in adjacency])
    return VoronoiGraph(pts, w, cells, areas, adjacency, mult, strength)


# --------------------------------------------------------------- events


@dataclass(frozen=True)
class VoronoiEvents:
    E_R: bool
    F_RH: bool
    K: float | None
    max_gap: float


def covering_radius(points: np.ndarray, sq: Window) -> float:
    """sup over x in sq of the distance from x to the nearest point.

    The supremum sits at a corner of ``sq``, a Voronoi vertex inside it, or
    a crossing of a ridge with its boundary. On the ridge of (i, j) the
    nearest sites are i and j, so no nearest-neighbour search is needed there.
    """
    if points.shape[0] == 0:
        return math.inf
    corners = sq.corners()
    gap = float(np.sqrt(((corners[:, None, :] - points[None, :, :]) ** 2).sum(-1)).min(axis=1).max())
    vor = _qhull(points)
    if vor is None:
        segs = _ridges_pairwise(points, sq)
        pairs = np.array(list(segs), dtype=np.int64).reshape(-1, 2)
        a = np.array([v[0] for v in segs.values()]).reshape(-1, 2)
        b = np.array([v[1] for v in segs.values()]).reshape(-1, 2)
    else:
        pairs, a, b = _ridge_arrays(points, sq, vor)
    if pairs.size:
        site = points[pairs[:, 0]]
        gap = max(gap, float(np.linalg.norm(a - site, axis=1).max()), float(np.linalg.norm(b - site, axis=1).max()))
    return gap


def _local_points(points, z, half):
    z = np.asarray(z, dtype=float)
    m = np.all(np.abs(points - z) <= half, axis=1)
    return np.nonzero(m)[0]


def check_voronoi_events(points, z, R: float, H: float, window=None, f: Callable | None = None) -> VoronoiEvents:
    """E_R: every location of z + Lambda_{5R} has a point at distance < R/10.
    F_RH: at most H R^2 points in z + Lambda_R.
    K: smallest min(F2, F3) multiplier over adjacent pairs with both sites in z + Lambda_{4R}.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    need = Window.square(z, 6.0 * R)
    w = need if window is None else Window.of(window)
    if not w.contains(need):
        raise CoverageError("the sample window must contain z + Lambda_{6R}")
    f = default_f if f is None else f
    inner = Window.square(z, 5.0 * R)
    # only sites within R/10 of z + Lambda_{5R} can decide E_R
    gap = covering_radius(pts[_local_points(pts, z, 5.0 * R + R / 10.0)], inner)
    e_r = gap < R / 10.0
    count = int(np.all(np.abs(pts - np.asarray(z, dtype=float)) <= R, axis=1).sum()) if pts.size else 0
    f_rh = count <= H * R * R
    k_val = None
    if e_r:
        # under E_R every cell of a site in z + Lambda_{4R} lies within R/10 of its site,
        # so the points of z + Lambda_{4.3R} determine those cells exactly
        local = _local_points(pts, z, 4.3 * R)
        sub = pts[local]
        vg = build_voronoi_graph(sub, Window.square(z, 4.3 * R), "F3")
        inside = np.all(np.abs(sub - np.asarray(z, dtype=float)) <= 4.0 * R, axis=1)
        fa = np.asarray(f(vg.areas), dtype=float)
        vals = [min(fa[i] * fa[j], length) for i, j, length in vg.adjacency if inside[i] and inside[j]]
        k_val = float(min(vals)) if vals else None
    return VoronoiEvents(bool(e_r), bool(f_rh), k_val, gap)


# --------------------------------------------------------------- oracles


def probe_covering(points: np.ndarray, sq: Window, threshold: float, pitch: float) -> bool:
    """True iff every probe point of the pitch lattice anchored at the lower-left corner of ``sq``
    is within distance < threshold of the point set.

    Lattice blocks are resolved by the 1-Lipschitz bound on the distance
    function: a block whose center is closer than threshold - radius passes
    whole, a center at distance >= threshold fails, others are split.
    """
    if points.shape[0] == 0:
        return False
    tree = cKDTree(points)
    nx = int(math.floor((sq.xmax - sq.xmin) / pitch + 1e-9))
    ny = int(math.floor((sq.ymax - sq.ymin) / pitch + 1e-9))
    blocks = np.array([[0, nx, 0, ny]], dtype=np.int64)  # inclusive index ranges
    while blocks.size:
        cx = (blocks[:, 0] + blocks[:, 1]) // 2
        cy = (blocks[:, 2] + blocks[:, 3]) // 2
        ctr = np.column_stack([sq.xmin + cx * pitch, sq.ymin + cy * pitch])
        d, _ = tree.query(ctr)
        if np.any(d >= threshold):
            return False
        ex = np.maximum(cx - blocks[:, 0], blocks[:, 1] - cx) * pitch
        ey = np.maximum(cy - blocks[:, 2], blocks[:, 3] - cy) * pitch
        rad = np.hypot(ex, ey)
        open_ = (d + rad >= threshold) & (rad > 0)
        blocks = blocks[open_]
        if not blocks.size:
            break
        cx, cy = cx[open_], cy[open_]
        kids = []
        for lo_x, hi_x in ((blocks[:, 0], cx), (cx + 1, blocks[:, 1])):
            for lo_y, hi_y in ((blocks[:, 2], cy), (cy + 1, blocks[:, 3])):
                kids.append(np.column_stack([lo_x, hi_x, lo_y, hi_y]))
        kids = np.vstack(kids)
        blocks = kids[(kids[:, 0] <= kids[:, 1]) & (kids[:, 2] <= kids[:, 3])]
    return True


def probe_events(points, z, R: float, H: float, window=None, f: Callable | None = None, pitch_frac: float = 1e-3):
    """Independent evaluation of the three events.

    E_R by the probe lattice of pitch R * pitch_frac; K from local bisector
    intervals against the sites within 2R/10, without any global diagram.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    f = default_f if f is None else f
    e_r = probe_covering(pts, Window.square(z, 5.0 * R), R / 10.0, R * pitch_frac)
    zz = np.asarray(z, dtype=float)
    count = int(sum(1 for p in pts if abs(p[0] - zz[0]) <= R and abs(p[1] - zz[1]) <= R))
    f_rh = count <= H * R * R
    k_val = None
    if e_r:
        k_val = _local_k(pts, z, R, f)
    return VoronoiEvents(bool(e_r), bool(f_rh), k_val, math.nan)


def _local_k(pts: np.ndarray, z, R: float, f) -> float | None:
    """K from local bisector geometry only.

    For each site in z + Lambda_{4R}, its facet with a neighbour j is the
    interval of the (i, j) bisector not cut off by any other site within
    2R/10; the cell area is the sum of facet * distance-to-bisector / 2.
    Both steps are vectorised over sites with padded neighbour lists.
    """
    tree = cKDTree(pts)
    sites = _local_points(pts, z, 4.0 * R)
    if sites.size == 0:
        return None
    lists = tree.query_ball_point(pts[sites], 2.0 * R / 10.0 + 1e-9)
    lists = [[j for j in lst if j != i] for i, lst in zip(sites.tolist(), lists)]
    if max(len(lst) for lst in lists) == 0:
        return None
    length = []
    area = []
    nbs = []
    for start in range(0, sites.size, 512):
        part = sites[start : start + 512]
        ln, ar, nb = _local_facets(pts, part, lists[start : start + 512])
        length.extend(ln)
        area.append(ar)
        nbs.extend(nb)
    area = np.concatenate(area)
    fa = dict(zip(sites.tolist(), np.asarray(f(area), dtype=float).tolist()))
    tol = 1e-12 * 12.0 * math.sqrt(2.0) * R
    vals = []
    for r_, i in enumerate(sites.tolist()):
        for c in np.nonzero(length[r_] > tol)[0].tolist():
            j = int(nbs[r_][c])
            if j > i and j in fa:
                vals.append(min(fa[i] * fa[j], float(length[r_][c])))
    return float(min(vals)) if vals else None


def _local_facets(pts: np.ndarray, sites: np.ndarray, lists):
    """Facet lengths (per site, per listed neighbour) and cell areas for a block of sites."""
    kmax = max(1, max(len(lst) for lst in lists))
    nb = np.full((sites.size, kmax), -1, dtype=np.int64)
    for r, lst in enumerate(lists):
        nb[r, : len(lst)] = sorted(lst)
    valid = nb >= 0
    p = pts[sites][:, None, :]  # (S, 1, 2)
    q = np.where(valid[..., None], pts[np.where(valid, nb, 0)], p + 1.0)  # padding sits off the site
    mid = 0.5 * (p + q)
    t = q - p
    dn = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    dn /= np.linalg.norm(dn, axis=-1, keepdims=True)
    # the site k cuts the (i, j) bisector mid_j + s dn_j to a s <= b
    a = 2.0 * np.einsum("skd,sjd->sjk", q - p, dn)
    b = (q * q).sum(-1)[:, None, :] - (p * p).sum(-1)[:, :, None] - 2.0 * np.einsum("skd,sjd->sjk", q - p, mid)
    use = valid[:, None, :] & valid[:, :, None] & ~np.eye(kmax, dtype=bool)[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = b / a
    hi = np.where(use & (a > 0), r, np.inf).min(axis=2)
    lo = np.where(use & (a < 0), r, -np.inf).max(axis=2)
    blocked = (use & (a == 0) & (b < 0)).any(axis=2)
    length = np.where(valid & ~blocked & (hi > lo), hi - lo, 0.0)
    half = 0.5 * np.linalg.norm(t, axis=-1)
    area = 0.5 * np.where(valid, length * half, 0.0).sum(axis=1)
    return [length[r_, : len(lst)] for r_, lst in enumerate(lists)], area, [nb[r_, : len(lst)] for r_, lst in enumerate(lists)]
