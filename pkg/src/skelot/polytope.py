"""Exact rational polytopes: hulls, halfspace forms, face lattices and volumes.

Hulls are computed in exact arithmetic. In dimension 1 and 2 the algorithms are
direct (interval, monotone chain); from dimension 3 on facets are found by
enumerating affinely independent vertex subsets, after a floating qhull
prefilter when the point cloud is large. Every result is re-verified exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import factorial
from typing import Iterable, Sequence

import numpy as np

from . import rational as rq
from .rational import Vector

Halfspace = tuple  # (normal: Vector, offset: Fraction) meaning normal . x <= offset


def _dedupe(points: Iterable[Sequence]) -> list[Vector]:
    seen = {}
    for p in points:
        v = rq.to_vector(p)
        seen.setdefault(v, None)
    return list(seen)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_2d(pts: list[Vector]) -> list[int]:
    """Counter-clockwise hull vertex indices, collinear points dropped."""
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    lower: list[int] = []
    for i in order:
        while len(lower) >= 2 and _cross(pts[lower[-2]], pts[lower[-1]], pts[i]) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(order):
        while len(upper) >= 2 and _cross(pts[upper[-2]], pts[upper[-1]], pts[i]) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def _facets_bruteforce(pts: list[Vector], cand: list[int]) -> list[tuple[Vector, Fraction]]:
    k = len(pts[0])
    found: dict = {}
    for subset in combinations(cand, k):
        base = pts[subset[0]]
        rows = [rq.sub(pts[i], base) for i in subset[1:]]
        ns = rq.nullspace(rows, k)
        if len(ns) != 1:
            continue
        a = ns[0]
        b = rq.dot(a, base)
        side = 0
        ok = True
        for i in cand:
            s = rq.dot(a, pts[i]) - b
            if s == 0:
                continue
            sgn = 1 if s > 0 else -1
            if side == 0:
                side = sgn
            elif sgn != side:
                ok = False
                break
        if not ok or side == 0:
            continue
        if side > 0:
            a = tuple(-x for x in a)
            b = -b
        key = rq.primitive(a, b)
        found[key] = None
    return list(found)


def _hull_full(pts: list[Vector]):
    """Hull of points that affinely span R^k.

    Returns (vertex indices, halfspaces, facets as frozensets of vertex indices).
    """
    k = len(pts[0])
    if k == 1:
        lo = min(range(len(pts)), key=lambda i: pts[i][0])
        hi = max(range(len(pts)), key=lambda i: pts[i][0])
        hs = [((Fraction(-1),), -pts[lo][0]), ((Fraction(1),), pts[hi][0])]
        return [lo, hi], hs, [frozenset([lo]), frozenset([hi])]
    if k == 2:
        ring = _hull_2d(pts)
        hs = []
        facets = []
        for u, v in zip(ring, ring[1:] + ring[:1]):
            pu, pv = pts[u], pts[v]
            a = (pv[1] - pu[1], -(pv[0] - pu[0]))
            a, b = rq.primitive(a, rq.dot(a, pu))
            hs.append((a, b))
            facets.append(frozenset([u, v]))
        return ring, hs, facets
    cand = list(range(len(pts)))
    if len(pts) > 4 * k:
        try:
            from scipy.spatial import ConvexHull

            qh = ConvexHull(np.array([[float(x) for x in p] for p in pts]))
            cand = sorted(set(int(i) for i in qh.vertices))
        except Exception:  # qhull precision trouble: fall back to every point
            cand = list(range(len(pts)))
    hs = _facets_bruteforce(pts, cand)
    if any(rq.dot(a, p) > b for a, b in hs for p in pts):
        hs = _facets_bruteforce(pts, list(range(len(pts))))
    facets = []
    on: dict[int, list[int]] = {}
    for fi, (a, b) in enumerate(hs):
        members = [i for i in range(len(pts)) if rq.dot(a, pts[i]) == b]
        for i in members:
            on.setdefault(i, []).append(fi)
        facets.append(members)
    verts = [i for i, fs in on.items() if rq.rank([hs[f][0] for f in fs]) == k]
    vset = set(verts)
    facets = [frozenset(i for i in m if i in vset) for m in facets]
    return sorted(verts), hs, facets


def _local_coordinates(pts: list[Vector]) -> tuple[list[Vector], list[int]]:
    """Project an affinely degenerate cloud injectively onto pivot coordinates."""
    base = pts[0]
    rows = [rq.sub(p, base) for p in pts[1:]]
    # pivot columns of the difference matrix restrict injectively on its row space
    _, cols = rq.row_reduce([list(r) for r in rows]) if rows else ([], [])
    return [tuple(p[c] for c in cols) for p in pts], cols


@dataclass(frozen=True)
class Polytope:
    """Convex hull of finitely many rational points.

    ``halfspaces`` (rows ``a . x <= b`` with primitive integer ``a``) are
    populated only when the polytope is full dimensional in its ambient space.
    """

    vertices: tuple
    dim: int
    halfspaces: tuple = ()
    facet_vertices: tuple = field(default=(), compare=False)

    @property
    def n(self) -> int:
        return len(self.vertices[0])

    @property
    def full_dimensional(self) -> bool:
        return self.dim == self.n

    def contains(self, x: Sequence, strict: bool = False) -> bool:
        if not self.full_dimensional:
            raise ValueError("membership is only defined for full-dimensional polytopes")
        x = rq.to_vector(x)
        if strict:
            return all(rq.dot(a, x) < b for a, b in self.halfspaces)
        return all(rq.dot(a, x) <= b for a, b in self.halfspaces)

    def contains_float(self, x: np.ndarray, strict: bool = False, tol: float = 0.0) -> np.ndarray:
        """Vectorized membership for floating points, shape (m, n) -> (m,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a = np.array([[float(v) for v in h[0]] for h in self.halfspaces])
        b = np.array([float(h[1]) for h in self.halfspaces])
        s = x @ a.T - b
        return np.all(s < -tol, axis=1) if strict else np.all(s <= tol, axis=1)

    def distance_to_boundary(self, x: Sequence[float]) -> float:
        """Euclidean distance from an interior point to the nearest facet (negative outside)."""
        x = np.asarray(x, dtype=float)
        best = np.inf
        for a, b in self.halfspaces:
            av = np.array([float(v) for v in a])
            best = min(best, (float(b) - av @ x) / np.linalg.norm(av))
        return float(best)

    @cached_property
    def volume(self) -> Fraction:
        if not self.full_dimensional:
            return Fraction(0)
        return polytope_volume(list(self.vertices))

    def interior_point(self) -> Vector:
        """Vertex barycenter: strictly interior for a full-dimensional polytope."""
        m = len(self.vertices)
        return tuple(sum(v[i] for v in self.vertices) / m for i in range(self.n))

    def bounding_box(self) -> tuple[Vector, Vector]:
        lo = tuple(min(v[i] for v in self.vertices) for i in range(self.n))
        hi = tuple(max(v[i] for v in self.vertices) for i in range(self.n))
        return lo, hi

    def is_box(self) -> bool:
        lo, hi = self.bounding_box()
        if not self.full_dimensional:
            return False
        return self.volume == _prod(h - l for l, h in zip(lo, hi))

    def ordered_vertices_2d(self) -> list[Vector]:
        if self.n != 2 or self.dim != 2:
            raise ValueError("polygon ordering needs a full-dimensional 2-polytope")
        pts = list(self.vertices)
        return [pts[i] for i in _hull_2d(pts)]


def _prod(xs):
    out = Fraction(1)
    for x in xs:
        out *= x
    return out


def convex_hull(points: Iterable[Sequence]) -> Polytope:
    pts = _dedupe(points)
    if not pts:
        raise ValueError("empty point set")
    n = len(pts[0])
    d = rq.affine_rank(pts)
    if d == 0:
        return Polytope(vertices=(pts[0],), dim=0)
    if d == n:
        verts, hs, facets = _hull_full(pts)
        vlist = tuple(pts[i] for i in verts)
        fv = tuple(tuple(pts[i] for i in sorted(f)) for f in facets)
        return Polytope(vertices=vlist, dim=d, halfspaces=tuple(hs), facet_vertices=fv)
    local, _ = _local_coordinates(pts)
    verts, _, facets = _hull_full(local)
    vlist = tuple(pts[i] for i in verts)
    fv = tuple(tuple(pts[i] for i in sorted(f)) for f in facets)
    return Polytope(vertices=vlist, dim=d, facet_vertices=fv)


def face_lattice(points: Sequence[Sequence]) -> list[tuple[int, frozenset]]:
    """All nonempty faces of conv(points) as (dim, frozenset of vertex tuples)."""
    top = convex_hull(points)
    out: dict[frozenset, int] = {frozenset(top.vertices): top.dim}
    stack = [top]
    while stack:
        p = stack.pop()
        if p.dim == 0:
            continue
        for fv in p.facet_vertices:
            key = frozenset(fv)
            if key in out:
                continue
            sub = convex_hull(fv)
            out[key] = sub.dim
            stack.append(sub)
    return sorted(((d, k) for k, d in out.items()), key=lambda t: (-t[0], sorted(t[1])))


def _triangulate(pts: list[Vector]) -> list[tuple[Vector, ...]]:
    p = convex_hull(pts)
    if p.dim == 0:
        return [(p.vertices[0],)]
    if p.dim == 1:
        return [tuple(sorted(p.vertices))]
    v0 = min(p.vertices)
    out = []
    for fv in p.facet_vertices:
        if v0 in fv:
            continue
        for s in _triangulate(list(fv)):
            out.append((v0,) + s)
    return out


def polytope_volume(points: Sequence[Sequence]) -> Fraction:
    """Exact Lebesgue volume of conv(points) (zero when not full dimensional)."""
    pts = _dedupe(points)
    n = len(pts[0])
    if rq.affine_rank(pts) < n:
        return Fraction(0)
    if n == 1:
        xs = [p[0] for p in pts]
        return max(xs) - min(xs)
    if n == 2:
        ring = [pts[i] for i in _hull_2d(pts)]
        return abs(polygon_area(ring))
    total = Fraction(0)
    for s in _triangulate(pts):
        total += abs(rq.det([rq.sub(v, s[0]) for v in s[1:]]))
    return total / factorial(n)


def triangulate(points: Sequence[Sequence]) -> list[tuple[Vector, ...]]:
    return _triangulate(_dedupe(points))


# -- polygon helpers (generic over float and Fraction arithmetic) -------------


def polygon_area(poly: Sequence[Sequence]):
    """Signed shoelace area (positive for counter-clockwise rings)."""
    m = len(poly)
    if m < 3:
        return 0 * (poly[0][0] if poly else 0)
    s = 0
    for i in range(m):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % m]
        s += x0 * y1 - x1 * y0
    return s / 2


def polygon_centroid(poly: Sequence[Sequence]):
    a = polygon_area(poly)
    if a == 0:
        m = len(poly)
        return tuple(sum(p[i] for p in poly) / m for i in range(2))
    cx = cy = 0
    m = len(poly)
    for i in range(m):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % m]
        w = x0 * y1 - x1 * y0
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    return (cx / (6 * a), cy / (6 * a))


def clip_polygon(poly: Sequence[Sequence], a: Sequence, b, labels: Sequence | None = None, new_label=None):
    """Sutherland-Hodgman clip of a convex ring against ``a . x <= b``.

    With ``labels`` (one per edge, edge i runs from vertex i to i+1) the
    surviving edges keep their labels and the edge created along the cut line
    receives ``new_label``. Returns the ring, or (ring, labels) when labelled.
    """
    out: list = []
    out_labels: list = []
    m = len(poly)
    if m == 0:
        return (out, out_labels) if labels is not None else out
    vals = [a[0] * p[0] + a[1] * p[1] - b for p in poly]
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        vp, vq = vals[i], vals[(i + 1) % m]
        lab = labels[i] if labels is not None else None
        if vp <= 0:
            out.append(p)
            if vq <= 0:
                out_labels.append(lab)
            else:
                t = vp / (vp - vq)
                out_labels.append(lab)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                out_labels.append(new_label)
        elif vq <= 0:
            t = vp / (vp - vq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
            out_labels.append(lab)
    if labels is None:
        return out
    # merge zero-length edges that can appear when the cut passes through a vertex
    ring, labs = [], []
    for i, pt in enumerate(out):
        if ring and ring[-1] == pt:
            labs[-1] = out_labels[i] if labs[-1] is None else labs[-1]
            continue
        ring.append(pt)
        labs.append(out_labels[i])
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring.pop()
        labs.pop()
    return ring, labs


def clip_box(poly: Sequence[Sequence], lo: Sequence, hi: Sequence):
    ring = list(poly)
    for i in range(2):
        e = [0, 0]
        e[i] = 1
        ring = clip_polygon(ring, e, hi[i])
        if not ring:
            return ring
        e = [0, 0]
        e[i] = -1
        ring = clip_polygon(ring, e, -lo[i])
        if not ring:
            return ring
    return ring


def box_ring(lo: Sequence, hi: Sequence) -> list:
    return [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]


def halfspaces_ring(poly: Polytope, as_float: bool = False) -> list:
    ring = poly.ordered_vertices_2d()
    if as_float:
        return [(float(x), float(y)) for x, y in ring]
    return ring


def box_intersection_volume(lo: Sequence, hi: Sequence, poly: Polytope, exact: bool = False):
    """Volume of an axis-aligned box intersected with a full-dimensional polytope.

    Exact (Fraction) when ``exact`` and the inputs are rational. Dimension 3+
    is supported only for box-shaped polytopes.
    """
    n = poly.n
    if n == 1:
        plo, phi = poly.bounding_box()
        conv = (lambda v: v) if exact else float
        a = max(conv(lo[0]), conv(plo[0]))
        b = min(conv(hi[0]), conv(phi[0]))
        return max(b - a, 0 * a)
    if n == 2:
        ring = halfspaces_ring(poly, as_float=not exact)
        if not exact:
            lo = [float(v) for v in lo]
            hi = [float(v) for v in hi]
        clipped = clip_box(ring, lo, hi)
        return abs(polygon_area(clipped)) if len(clipped) >= 3 else 0 * lo[0]
    if poly.is_box():
        plo, phi = poly.bounding_box()
        conv = (lambda v: v) if exact else float
        out = conv(1)
        for i in range(n):
            w = min(conv(hi[i]), conv(phi[i])) - max(conv(lo[i]), conv(plo[i]))
            if w <= 0:
                return 0 * out
            out *= w
        return out
    raise NotImplementedError("box clipping beyond dimension 2 needs a box-shaped polytope")


def region_vertices(poly: Polytope, halfspaces: Sequence[Halfspace]) -> list[Vector]:
    """Exact vertices of ``poly`` cut by extra halfspaces ``a . x <= b``.

    Returns an empty list for an empty region. The region may be lower
    dimensional (a point or a segment when the cuts touch).
    """
    n = poly.n
    if n == 1:
        lo, hi = poly.bounding_box()
        a_, b_ = lo[0], hi[0]
        for a, b in halfspaces:
            if a[0] > 0:
                b_ = min(b_, b / a[0])
            elif a[0] < 0:
                a_ = max(a_, b / a[0])
            elif b < 0:
                return []
        if a_ > b_:
            return []
        return [(a_,)] if a_ == b_ else [(a_,), (b_,)]
    if n == 2:
        ring = [tuple(v) for v in poly.ordered_vertices_2d()]
        for a, b in halfspaces:
            if a[0] == 0 and a[1] == 0:
                if b < 0:
                    return []
                continue
            ring = clip_polygon(ring, a, b)
            if not ring:
                return []
        return _dedupe(ring)
    cons = list(poly.halfspaces) + [(tuple(a), b) for a, b in halfspaces]
    verts = []
    for sub in combinations(range(len(cons)), n):
        x = rq.solve([cons[i][0] for i in sub], [cons[i][1] for i in sub])
        if x is None:
            continue
        if all(rq.dot(a, x) <= b for a, b in cons):
            verts.append(x)
    return _dedupe(verts)
