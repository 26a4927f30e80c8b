"""Cost functions c(x, p; y), c-transforms and domains of affine linearity.

Every cost used here is, for fixed p, a maximum of finitely many affine
functions of x. ``CostField.pieces`` exposes that decomposition; the
transport module builds exact cells from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import rational as rq
from .errors import NoLatticePoint, NonUniqueGradient, PNotInBody, ShrunkToPoint
from .polytope import Polytope, convex_hull, region_vertices
from .skeleton import Skeleton, SkeletonPoint
from .tropical import BasisFamily, TropicalSection, linearity_halfspaces


@dataclass(frozen=True)
class Anchor:
    y: SkeletonPoint
    irrationality_level: int | None = None

    @property
    def face(self) -> str:
        return self.y.face

    @property
    def coords(self) -> np.ndarray:
        return self.y.as_float()


def make_anchor(skeleton: Skeleton, y: SkeletonPoint, family: BasisFamily | None = None, l_max: int | None = None):
    """Anchor with the irrationality level at which ``y`` was certified (None if uncertified)."""
    from .tropical import is_sufficiently_irrational

    if not skeleton.is_interior(SkeletonPoint(y.face, rq.to_vector(y.coords))):
        raise ValueError("anchor must lie in the interior of a top face")
    level = None
    if family is not None:
        top = family.l_max if l_max is None else l_max
        if is_sufficiently_irrational(y, family, top, skeleton):
            level = top
    return Anchor(y, level)


# -- closed forms -----------------------------------------------------------------


class LinearCost:
    """c(x, p; y) = <p, x - y>, valid globally when every section is a single monomial."""

    kind = "linear"

    def __init__(self, body: Polytope):
        self._body = body

    def body(self, y: np.ndarray) -> Polytope:
        return self._body

    def value(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x @ p.T - (p @ y)[None, :]

    def pieces(self, p: np.ndarray, y: np.ndarray):
        return p[None, :].copy(), np.array([-float(p @ y)])

    def rematch(self, p: np.ndarray, y_new: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float)


class TateCost:
    """Limit cost of the Tate-curve theta basis with quadratic coefficient 1/(2d).

    ``g_p(x) = max_k (p + d k) x - (p + d k)^2 / (2d)`` and
    ``c(x, p; y) = g_p(x) - g_p(y)``; on the body ``[d y - d/2, d y + d/2]``
    the branch k = 0 is active at y.
    """

    kind = "tate"

    def __init__(self, d: int = 1):
        self.d = int(d)

    def body(self, y: np.ndarray) -> Polytope:
        yq = rq.to_fraction(float(y[0]))
        return convex_hull([(self.d * yq - Fraction(self.d, 2),), (self.d * yq + Fraction(self.d, 2),)])

    def _k_range(self, p: float) -> range:
        d = self.d
        return range(math.floor((-p) / d) - 2, math.ceil((d - p) / d) + 3)

    def g(self, x: np.ndarray, p: float) -> np.ndarray:
        d = self.d
        out = np.full(np.shape(x), -np.inf)
        for k in self._k_range(p):
            v = p + d * k
            out = np.maximum(out, v * x - v * v / (2 * d))
        return out

    def value(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        x1 = x[:, 0]
        out = np.empty((len(x), len(p)))
        for j, pj in enumerate(p[:, 0]):
            out[:, j] = self.g(x1, pj) - self.g(np.array([y[0]]), pj)[0]
        return out

    def pieces(self, p: np.ndarray, y: np.ndarray):
        d = self.d
        p0 = float(p[0])
        gy = float(self.g(np.array([y[0]]), p0)[0])
        ks = list(self._k_range(p0))
        grads = np.array([[p0 + d * k] for k in ks])
        consts = np.array([-(p0 + d * k) ** 2 / (2 * d) - gy for k in ks])
        return grads, consts

    def rematch(self, p: np.ndarray, y_new: np.ndarray) -> np.ndarray:
        d = self.d
        p0 = float(p[0])
        return np.array([p0 + d * round((d * float(y_new[0]) - p0) / d)])


class ProductCost:
    """Sum of one-dimensional closed-form costs on a product skeleton."""

    kind = "product"

    def __init__(self, factors: Sequence):
        self.factors = list(factors)

    def body(self, y: np.ndarray) -> Polytope:
        from itertools import product

        ivs = [f.body(np.array([y[i]])).bounding_box() for i, f in enumerate(self.factors)]
        corners = product(*[(lo[0], hi[0]) for lo, hi in ivs])
        return convex_hull(list(corners))

    def value(self, x: np.ndarray, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.zeros((len(x), len(p)))
        for i, f in enumerate(self.factors):
            out += f.value(x[:, i : i + 1], p[:, i : i + 1], y[i : i + 1])
        return out

    def pieces(self, p: np.ndarray, y: np.ndarray):
        grads = np.zeros((1, 0))
        consts = np.zeros(1)
        for i, f in enumerate(self.factors):
            g, c = f.pieces(p[i : i + 1], y[i : i + 1])
            grads = np.concatenate(
                [np.repeat(grads, len(g), axis=0), np.tile(g, (len(grads), 1))], axis=1
            )
            consts = (consts[:, None] + c[None, :]).reshape(-1)
        return grads, consts

    def rematch(self, p: np.ndarray, y_new: np.ndarray) -> np.ndarray:
        return np.concatenate([f.rematch(p[i : i + 1], y_new[i : i + 1]) for i, f in enumerate(self.factors)])


# -- Fekete limits ------------------------------------------------------------------


@dataclass(frozen=True)
class FeketeValue:
    value: float
    error: float
    degree: int
    label: str
    lattice_point: tuple


def gradient_index(family: BasisFamily, y: SkeletonPoint, l: int) -> dict:
    """Map gradient -> section at anchor ``y`` for degree ``l``; raises on walls."""
    yq = rq.to_vector(y.coords)
    out = {}
    for s in family.basis(l).sections:
        gs = s.gradients_at(y.face, yq)
        if len(gs) != 1:
            raise NonUniqueGradient(f"anchor lies on a wall of section {s.label!r} (degree {l})")
        out[next(iter(gs))] = s
    return out


class _FeketeTable:
    def __init__(self, family: BasisFamily, anchor: Anchor):
        self.family = family
        self.anchor = anchor
        self._index: dict[int, dict] = {}
        self._fy: dict[tuple, float] = {}
        self.C = float(max(Fraction(s.max_gradient_norm, l) for l in (1, family.l_max) for s in family.basis(l).sections))

    def index(self, l: int) -> dict:
        if l not in self._index:
            self._index[l] = gradient_index(self.family, self.anchor.y, l)
        return self._index[l]

    def f_at_y(self, s: TropicalSection) -> float:
        key = (s.degree, s.label)
        if key not in self._fy:
            self._fy[key] = float(s.value(self.anchor.face, rq.to_vector(self.anchor.y.coords)))
        return self._fy[key]

    def section_for(self, p: np.ndarray, l_max: int):
        """Largest degree l whose gradient set at y contains round(l p)."""
        for l in range(l_max, 0, -1):
            q = tuple(int(round(l * v)) for v in p)
            s = self.index(l).get(q)
            if s is not None:
                return l, q, s
        return None


def fekete_cost(family: BasisFamily, x: SkeletonPoint, p: Sequence[float], anchor: Anchor, body: Polytope | None = None,
                l_max: int | None = None, table: _FeketeTable | None = None) -> FeketeValue:
    """Cost from the highest-degree section whose scaled gradient approximates ``p``.

    The reported error is ``|c_l - c_{l//2}| + C |p - q/l|``; it is an
    empirical Cauchy difference, not a proven bound.
    """
    p = np.asarray(p, dtype=float)
    if body is not None and not body.contains_float(p, strict=True)[0]:
        raise PNotInBody(f"p={p.tolist()} is not in the interior of the body")
    table = table or _FeketeTable(family, anchor)
    top = family.l_max if l_max is None else l_max
    hit = table.section_for(p, top)
    if hit is None:
        raise NoLatticePoint(f"no lattice approximation of p={p.tolist()} up to degree {top}")
    l, q, s = hit
    face = x.face if x.face in s.terms else anchor.face
    xv = np.asarray([float(c) for c in x.coords])[None, :]
    c_l = (float(s.evaluate(face, xv)[0]) - table.f_at_y(s)) / l
    dist = float(np.max(np.abs(p - np.array(q) / l)))
    err = table.C * dist
    half = table.section_for(p, l // 2) if l >= 2 else None
    if half is not None:
        lh, _, sh = half
        c_h = (float(sh.evaluate(face, xv)[0]) - table.f_at_y(sh)) / lh
        err += abs(c_l - c_h)
    else:
        err = math.inf
    return FeketeValue(c_l, err, l, s.label, q)


# -- the field -------------------------------------------------------------------------


@dataclass
class CostField:
    """Evaluator for c(x, p; y) on the top face of the anchor.

    ``mode`` is "closed_form" (model-provided formula) or "fekete" (sections of
    the family, highest usable degree up to ``l_max``).
    """

    anchor: Anchor
    mode: str
    body_hint: Polytope
    closed: object | None = None
    family: BasisFamily | None = None
    l_max: int | None = None
    _table: _FeketeTable | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.body_hint.n

    @property
    def y(self) -> np.ndarray:
        return self.anchor.coords

    def _fekete(self) -> _FeketeTable:
        if self._table is None:
            self._table = _FeketeTable(self.family, self.anchor)
        return self._table

    def _section(self, p: np.ndarray):
        hit = self._fekete().section_for(np.asarray(p, dtype=float), self.l_max or self.family.l_max)
        if hit is None:
            raise NoLatticePoint(f"no lattice approximation of p={np.asarray(p).tolist()}")
        return hit

    def evaluate(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Matrix ``C[i, j] = c(x_i, p_j; y)`` for x of shape (m, n), p of shape (k, n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = np.atleast_2d(np.asarray(p, dtype=float))
        if self.mode == "closed_form":
            return self.closed.value(x, p, self.y)
        out = np.empty((len(x), len(p)))
        for j, pj in enumerate(p):
            l, _, s = self._section(pj)
            out[:, j] = (s.evaluate(self.anchor.face, x) - self._fekete().f_at_y(s)) / l
        return out

    def value(self, x: Sequence[float], p: Sequence[float]) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)[None, :], np.asarray(p, dtype=float)[None, :])[0, 0])

    def pieces(self, p: Sequence[float]):
        """Affine decomposition ``c(x, p) = max_r <G_r, x> + c_r`` as arrays (G, c)."""
        p = np.asarray(p, dtype=float)
        if self.mode == "closed_form":
            return self.closed.pieces(p, self.y)
        l, _, s = self._section(p)
        ts = s.face_terms(self.anchor.face)
        g = np.array([[float(c) / l for c in t.gradient] for t in ts])
        c = np.array([(-float(t.shift) - self._fekete().f_at_y(s)) / l for t in ts])
        return g, c

    def rematch(self, p: Sequence[float], y_new: Sequence[float]) -> np.ndarray:
        if self.mode != "closed_form":
            raise NotImplementedError("anchor rematching is available for closed-form costs")
        return self.closed.rematch(np.asarray(p, dtype=float), np.asarray(y_new, dtype=float))

    def with_anchor(self, anchor: Anchor) -> "CostField":
        if self.mode == "closed_form":
            return CostField(anchor, self.mode, self.closed.body(anchor.coords), self.closed)
        from .okounkov import gradient_semigroup, okounkov_body

        body = okounkov_body(gradient_semigroup(self.family, anchor, self.l_max))
        return CostField(anchor, "fekete", body, family=self.family, l_max=self.l_max)


def closed_form_field(closed, anchor: Anchor) -> CostField:
    return CostField(anchor, "closed_form", closed.body(anchor.coords), closed)


def fekete_field(family: BasisFamily, anchor: Anchor, l_max: int | None = None) -> CostField:
    from .okounkov import gradient_semigroup, okounkov_body

    body = okounkov_body(gradient_semigroup(family, anchor, l_max))
    return CostField(anchor, "fekete", body, family=family, l_max=l_max or family.l_max)


# -- grid functions and c-transforms ------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    points: np.ndarray
    values: np.ndarray
    argmax: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def shifted(self, c: float) -> "GridFunction":
        return GridFunction(self.points, self.values + c)


def cost_matrix(cf: CostField, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    return cf.evaluate(xs, ps)


def c_transform_skeleton_to_body(phi: GridFunction, cf: CostField, samples: np.ndarray, C: np.ndarray | None = None) -> GridFunction:
    """``phi^c(p_j) = max_i c(x_i, p_j) - phi_i``; ties go to the lowest node index."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    C = cf.evaluate(phi.points, samples) if C is None else C
    M = C - phi.values[:, None]
    arg = np.argmax(M, axis=0)
    return GridFunction(samples, M[arg, np.arange(M.shape[1])], arg)


def c_transform_body_to_skeleton(psi: GridFunction, cf: CostField, points: np.ndarray, C: np.ndarray | None = None) -> GridFunction:
    """``psi^c(x_i) = max_j c(x_i, p_j) - psi_j``; ties go to the lowest sample index."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    C = cf.evaluate(points, psi.points) if C is None else C
    M = C - psi.values[None, :]
    arg = np.argmax(M, axis=1)
    return GridFunction(points, M[np.arange(M.shape[0]), arg], arg)


def project_to_Pc(f: GridFunction, cf: CostField, samples: np.ndarray, C: np.ndarray | None = None) -> GridFunction:
    """Double transform ``(f^c)^c``: the largest minorant of f of the form max_j c(., p_j) - psi_j."""
    C = cf.evaluate(f.points, samples) if C is None else C
    fc = c_transform_skeleton_to_body(f, cf, samples, C)
    return c_transform_body_to_skeleton(fc, cf, f.points, C)


# -- affine domains -------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineDomain:
    face: str
    vertices: tuple
    n_constraints: int
    l_max: int
    distance: float

    @property
    def polytope(self) -> Polytope:
        return convex_hull(self.vertices)


def affine_domain(cf: CostField, K: Polytope, l_max: int | None = None, family: BasisFamily | None = None,
                  skeleton: Skeleton | None = None, check_points: int = 16) -> AffineDomain:
    """Intersect the linearity domains at y of all sections with scaled gradient in K.

    The result U contains y; for p in K the cost is <p, x - y> on U. Raises
    ShrunkToPoint when a section wall bounding U passes within 1/l_max of y,
    which is the expected outcome when K reaches the boundary of the body.
    Face boundaries do not count as walls.
    """
    family = family if family is not None else cf.family
    if family is None:
        raise ValueError("affine_domain needs the basis family")
    skeleton = skeleton if skeleton is not None else family.skeleton
    top = l_max or cf.l_max or family.l_max
    for v in K.vertices:
        if not cf.body_hint.contains(v):
            raise PNotInBody(f"K vertex {v} is not in the body")
    face = cf.anchor.face
    poly = skeleton.faces[face].polytope
    yq = rq.to_vector(cf.anchor.y.coords)
    cuts = []
    for l in range(1, top + 1):
        for g, s in gradient_index(family, cf.anchor.y, l).items():
            if not K.contains(tuple(Fraction(c, l) for c in g)):
                continue
            ts = s.face_terms(face)
            i = next(k for k, t in enumerate(ts) if t.gradient == g)
            cuts.extend(linearity_halfspaces(ts, i))
    uniq = list(dict.fromkeys((tuple(a), b) for a, b in cuts if any(c != 0 for c in a)))
    verts = region_vertices(poly, uniq)
    if not verts or rq.affine_rank(verts) < skeleton.n:
        raise ShrunkToPoint(f"affine domain around y is degenerate at l_max={top}")
    U = convex_hull(verts)
    yf = np.array([float(c) for c in yq])
    dist = math.inf
    for a, b in uniq:
        af = np.array([float(c) for c in a])
        dist = min(dist, (float(b) - float(af @ yf)) / float(np.linalg.norm(af)))
    if dist <= 1.0 / top:
        raise ShrunkToPoint(f"affine domain around y has inradius {dist:.3g} <= 1/l_max at l_max={top}")
    return AffineDomain(face, tuple(U.vertices), len(uniq), top, dist)
