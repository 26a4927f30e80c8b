"""Gradient semigroups at an anchor, Okounkov bodies and their discretized measures."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rational as rq
from .cost import Anchor
from .errors import EmptySemigroup, NonUniqueGradient, PNotInBody
from .parallel import ordered_map
from .polytope import Polytope, clip_box, convex_hull, halfspaces_ring, polygon_area, polygon_centroid
from .tropical import BasisFamily


@dataclass(frozen=True)
class GradientSemigroup:
    anchor: Anchor
    levels: dict
    l_max: int
    labels: dict

    def level(self, l: int) -> frozenset:
        return self.levels.get(l, frozenset())

    def additivity_failures(self) -> list[tuple]:
        """Pairs (l, l') and a witness sum missing from level l + l'."""
        out = []
        for l1 in sorted(self.levels):
            for l2 in sorted(self.levels):
                if l2 < l1 or l1 + l2 > self.l_max:
                    continue
                target = self.levels.get(l1 + l2, frozenset())
                for a in self.levels[l1]:
                    miss = next((b for b in self.levels[l2] if tuple(x + y for x, y in zip(a, b)) not in target), None)
                    if miss is not None:
                        out.append((l1, l2, tuple(x + y for x, y in zip(a, miss))))
                        break
        return out

    def scaled_points(self) -> list[tuple]:
        pts = {}
        for l, gs in self.levels.items():
            for g in gs:
                pts.setdefault(tuple(Fraction(c, l) for c in g), None)
        return list(pts)


def gradient_semigroup(family: BasisFamily, y, l_max: int | None = None, workers: int | None = None) -> GradientSemigroup:
    """Unique argmax gradients of every section at the anchor, for degrees up to l_max."""
    anchor = y if isinstance(y, Anchor) else Anchor(y)
    top = family.l_max if l_max is None else min(l_max, family.l_max)
    yq = rq.to_vector(anchor.y.coords)

    def level(l):
        gs, labels = [], {}
        for s in family.basis(l).sections:
            g = s.gradients_at(anchor.face, yq)
            if len(g) != 1:
                raise NonUniqueGradient(f"anchor lies on a wall of section {s.label!r} (degree {l})")
            gv = next(iter(g))
            gs.append(gv)
            labels[gv] = s.label
        return frozenset(gs), labels

    res = ordered_map(level, range(1, top + 1), workers)
    return GradientSemigroup(
        anchor,
        {l: r[0] for l, r in zip(range(1, top + 1), res)},
        top,
        {l: r[1] for l, r in zip(range(1, top + 1), res)},
    )


@dataclass(frozen=True)
class OkounkovBody:
    polytope: Polytope
    l_max: int

    @property
    def vertices(self) -> tuple:
        return self.polytope.vertices

    @property
    def halfspaces(self) -> tuple:
        return self.polytope.halfspaces

    @property
    def volume(self) -> Fraction:
        return self.polytope.volume

    def contains(self, x, strict: bool = False) -> bool:
        return self.polytope.contains(x, strict)

    def contains_float(self, x, strict: bool = False, tol: float = 0.0):
        return self.polytope.contains_float(x, strict, tol)

    def representations_agree(self) -> bool:
        """Every vertex satisfies all halfspaces and lies on at least n of them."""
        n = self.polytope.n
        for v in self.vertices:
            vals = [rq.dot(a, v) - b for a, b in self.halfspaces]
            if any(x > 0 for x in vals) or sum(1 for x in vals if x == 0) < n:
                return False
        return True


def okounkov_body(g: GradientSemigroup) -> Polytope:
    """Exact convex hull of the scaled gradients l^-1 Gamma_l, l <= l_max."""
    populated = [l for l, gs in g.levels.items() if gs]
    if len(populated) < 2:
        raise EmptySemigroup("need at least two populated degrees")
    pts = g.scaled_points()
    n = len(pts[0])
    # only the extreme points of each level can be vertices; prefilter by level hulls
    if n >= 2 and len(pts) > 200:
        keep = []
        for l in populated:
            lvl = [tuple(Fraction(c, l) for c in v) for v in g.levels[l]]
            keep.extend(convex_hull(lvl).vertices if rq.affine_rank(lvl) == n else lvl)
        pts = keep
    return convex_hull(pts)


@dataclass(frozen=True)
class VolumeReport:
    volume: Fraction
    expected: Fraction
    discrepancy: Fraction
    counts: tuple  # (l, N(l), N(l) n!/l^n)


def body_volume_check(body: Polytope, expected_Ln, n: int, g: GradientSemigroup | None = None) -> VolumeReport:
    expected = Fraction(rq.to_fraction(expected_Ln), math.factorial(n))
    vol = body.volume
    counts = ()
    if g is not None:
        counts = tuple(
            (l, len(g.levels[l]), float(Fraction(len(g.levels[l]) * math.factorial(n), l**n))) for l in sorted(g.levels)
        )
    return VolumeReport(vol, expected, abs(vol - expected), counts)


@dataclass(frozen=True)
class IntegerPointsReport:
    l0: int | None
    l_max: int
    missing: tuple  # (l, point) pairs at degrees >= the best candidate


def _lattice_points_in(K: Polytope, l: int) -> list[tuple]:
    lo, hi = K.bounding_box()
    ranges = [range(math.ceil(l * a), math.floor(l * b) + 1) for a, b in zip(lo, hi)]
    return [p for p in itertools.product(*ranges) if K.contains(tuple(Fraction(c, l) for c in p))]


def integer_points_check(g: GradientSemigroup, K: Polytope, body: Polytope | None = None) -> IntegerPointsReport:
    """Smallest l0 with lK ∩ Z^n ⊆ Gamma_l for all l0 <= l <= l_max."""
    body = body if body is not None else okounkov_body(g)
    for v in K.vertices:
        if not body.contains(v, strict=True):
            raise PNotInBody(f"K must lie strictly inside the body; vertex {v} does not")
    bad = []
    for l in sorted(g.levels):
        missing = [p for p in _lattice_points_in(K, l) if p not in g.levels[l]]
        bad.append((l, missing))
    l0 = None
    for l, missing in reversed(bad):
        if missing:
            break
        l0 = l
    miss = tuple((l, p) for l, ms in bad for p in ms)
    return IntegerPointsReport(l0, g.l_max, miss)


def central_box(body: Polytope, fraction=Fraction(3, 5)) -> Polytope:
    """Central axis box scaled by ``fraction``.

    The base box is the largest one inside the body that is centered at the
    vertex average and has the bounding box's aspect ratio. On a box body
    it is the body itself. Floats are read by their decimal repr, so 0.6 is 3/5.
    """
    f = Fraction(repr(fraction)) if isinstance(fraction, float) else rq.to_fraction(fraction)
    lo, hi = body.bounding_box()
    c = [sum(col) / len(body.vertices) for col in zip(*body.vertices)]
    w = [(b - a) / 2 for a, b in zip(lo, hi)]
    t = Fraction(1)
    for a, b in body.halfspaces:
        # worst corner of c + t * [-w, w] against a . x <= b
        reach = sum(abs(ai) * wi for ai, wi in zip(a, w))
        if reach > 0:
            t = min(t, (b - rq.dot(a, c)) / reach)
    r = [wi * t * f for wi in w]
    return convex_hull(list(itertools.product(*[(ci - ri, ci + ri) for ci, ri in zip(c, r)])))


@dataclass(frozen=True)
class BodyMeasure:
    samples: np.ndarray
    weights: np.ndarray
    scheme: str
    volume: float

    def __len__(self) -> int:
        return len(self.weights)


def body_measure(body: Polytope, scheme: str = "lattice", resolution=8) -> BodyMeasure:
    """Cell-based discretization of the normalized Lebesgue measure on the body.

    ``lattice`` uses the cells of (1/resolution) Z^n, ``centroid`` cells of
    side ``resolution``; each cell clipped to the body contributes one sample
    at the centroid of the clipped piece with weight proportional to its volume.
    """
    if scheme == "lattice":
        h = Fraction(1, int(resolution))
    elif scheme == "centroid":
        h = rq.to_fraction(resolution)
    else:
        raise ValueError(f"unknown body scheme {scheme!r}")
    if h <= 0:
        raise ValueError("resolution must be positive")
    n = body.n
    lo, hi = body.bounding_box()
    idx = [range(math.floor(a / h), math.ceil(b / h)) for a, b in zip(lo, hi)]
    samples, weights = [], []
    if n == 1:
        for k in idx[0]:
            a, b = max(k * h, lo[0]), min((k + 1) * h, hi[0])
            if b > a:
                samples.append([float((a + b) / 2)])
                weights.append(float(b - a))
    elif n == 2:
        ring = halfspaces_ring(body, as_float=True)
        box = body.is_box()
        for i in idx[0]:
            for j in idx[1]:
                clo = (float(i * h), float(j * h))
                chi = (float((i + 1) * h), float((j + 1) * h))
                if box:
                    a = [max(clo[0], float(lo[0])), max(clo[1], float(lo[1]))]
                    b = [min(chi[0], float(hi[0])), min(chi[1], float(hi[1]))]
                    if b[0] > a[0] and b[1] > a[1]:
                        samples.append([(a[0] + b[0]) / 2, (a[1] + b[1]) / 2])
                        weights.append((b[0] - a[0]) * (b[1] - a[1]))
                    continue
                piece = clip_box(ring, clo, chi)
                if len(piece) < 3:
                    continue
                area = abs(polygon_area(piece))
                if area <= 1e-15:
                    continue
                samples.append(list(polygon_centroid(piece)))
                weights.append(area)
    else:
        if not body.is_box():
            raise NotImplementedError("body measures in dimension >= 3 need a box-shaped body")
        for cell in itertools.product(*idx):
            a = [max(k * h, l_) for k, l_ in zip(cell, lo)]
            b = [min((k + 1) * h, u) for k, u in zip(cell, hi)]
            if all(y > x for x, y in zip(a, b)):
                samples.append([float((x + y) / 2) for x, y in zip(a, b)])
                weights.append(float(math.prod(y - x for x, y in zip(a, b))))
    w = np.array(weights)
    total = float(body.volume)
    return BodyMeasure(np.array(samples, dtype=float), w / w.sum(), f"{scheme}:{resolution}", total)


def parse_body_scheme(text: str) -> tuple[str, object]:
    kind, _, arg = text.partition(":")
    if kind == "lattice":
        return kind, int(arg or 8)
    if kind == "centroid":
        return kind, rq.to_fraction(arg or "1/8")
    raise ValueError(f"unknown body scheme {text!r}")


def containment_in_transform_domain(g: GradientSemigroup, family: BasisFamily) -> bool:
    """Each scaled gradient p = q/l is a subgradient at y of the section l^-1 log|theta|.

    The section envelope itself is a P_c witness, so this reports the
    containment of the body in the set of attained gradients.
    """
    yq = rq.to_vector(g.anchor.y.coords)
    for l, gs in g.levels.items():
        for s in family.basis(l).sections:
            if next(iter(s.gradients_at(g.anchor.face, yq))) not in gs:
                return False
    return True
