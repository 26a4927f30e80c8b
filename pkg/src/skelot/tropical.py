"""Tropical sections as per-face upper envelopes of integral affine functions.

A degree-l section is stored by its terms ``<p, x> - a`` (integer gradient
``p``, rational shift ``a``) on every top face; its value is the maximum of
the terms. This module validates bases via distinct leading gradients on each
chamber of the wall complex and answers the pointwise questions (gradients,
walls through a point) that the rest of the package needs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import rational as rq
from .errors import DegreeMismatch, FaceMismatch, FaceMissing, MalformedInput
from .polytope import Polytope, clip_polygon, polygon_area, region_vertices
from .skeleton import Skeleton, SkeletonPoint


@dataclass(frozen=True, order=True)
class MonomialTerm:
    gradient: tuple
    shift: Fraction

    def value(self, x: Sequence) -> Fraction:
        return rq.dot(self.gradient, x) - self.shift


def term(p: Iterable[int], a=0) -> MonomialTerm:
    return MonomialTerm(tuple(int(v) for v in p), rq.to_fraction(a))


@dataclass(frozen=True)
class TropicalSection:
    degree: int
    terms: Mapping[str, tuple]
    label: str = ""

    def face_terms(self, face: str) -> tuple:
        try:
            return self.terms[face]
        except KeyError:
            raise FaceMissing(f"section {self.label!r} has no terms on face {face!r}") from None

    @cached_property
    def _arrays(self) -> dict:
        out = {}
        for f, ts in self.terms.items():
            g = np.array([[float(c) for c in t.gradient] for t in ts])
            a = np.array([float(t.shift) for t in ts])
            out[f] = (g, a)
        return out

    def value(self, face: str, x: Sequence):
        """Exact envelope value at a rational point (float in, float out otherwise)."""
        ts = self.face_terms(face)
        if all(isinstance(c, (int, Fraction)) for c in x):
            return max(t.value(x) for t in ts)
        return float(self.evaluate(face, np.asarray(x, dtype=float)[None, :])[0])

    def evaluate(self, face: str, x: np.ndarray) -> np.ndarray:
        """Vectorized envelope values at rows of ``x`` (shape (m, n))."""
        self.face_terms(face)
        g, a = self._arrays[face]
        return np.max(np.atleast_2d(x) @ g.T - a, axis=1)

    def active(self, face: str, x: np.ndarray) -> np.ndarray:
        """Index of the first maximizing term at each row of ``x``."""
        self.face_terms(face)
        g, a = self._arrays[face]
        return np.argmax(np.atleast_2d(x) @ g.T - a, axis=1)

    def argmax_terms(self, face: str, x: Sequence) -> list[MonomialTerm]:
        ts = self.face_terms(face)
        x = rq.to_vector(x)
        vals = [t.value(x) for t in ts]
        top = max(vals)
        return [t for t, v in zip(ts, vals) if v == top]

    def gradients_at(self, face: str, x: Sequence) -> set:
        return {t.gradient for t in self.argmax_terms(face, x)}

    @property
    def max_gradient_norm(self) -> int:
        return max(max((abs(c) for c in t.gradient), default=0) for ts in self.terms.values() for t in ts)


def linearity_halfspaces(terms: Sequence[MonomialTerm], i: int) -> list:
    """Halfspaces ``(g_k - g_i) . x <= a_k - a_i`` cutting out where term i is maximal."""
    ti = terms[i]
    out = []
    for k, tk in enumerate(terms):
        if k == i:
            continue
        normal = tuple(Fraction(gk - gi) for gk, gi in zip(tk.gradient, ti.gradient))
        out.append((normal, tk.shift - ti.shift))
    return out


def prune_terms(terms: Iterable[MonomialTerm], poly: Polytope | None = None) -> tuple:
    """Drop duplicated and strictly dominated terms.

    Terms sharing a gradient keep only the smallest shift. With a face
    polytope, a term is also dropped when the set where it attains the maximum
    is empty on the face; terms that tie on a lower-dimensional set are kept.
    """
    best: dict[tuple, MonomialTerm] = {}
    for t in terms:
        cur = best.get(t.gradient)
        if cur is None or t.shift < cur.shift:
            best[t.gradient] = t
    ts = sorted(best.values())
    if poly is None or len(ts) == 1:
        return tuple(ts)
    kept = [t for i, t in enumerate(ts) if region_vertices(poly, linearity_halfspaces(ts, i))]
    return tuple(kept)


def make_section(degree: int, faces: Mapping[str, Iterable], label: str = "", skeleton: Skeleton | None = None):
    """Build a section from ``{face: [(p, a), ...]}`` or term objects, pruning on each face."""
    out = {}
    for f, raw in faces.items():
        ts = [t if isinstance(t, MonomialTerm) else term(*t) for t in raw]
        if not ts:
            raise MalformedInput(f"section {label!r} has no terms on face {f}")
        poly = skeleton.face(f).polytope if skeleton is not None else None
        out[f] = prune_terms(ts, poly)
    return TropicalSection(degree, out, label)


def _resolve_face(s: TropicalSection, x: SkeletonPoint, skeleton: Skeleton | None) -> str:
    if x.face in s.terms:
        return x.face
    if skeleton is not None:
        for f in skeleton.incidence.get(x.face, ()):
            if f in s.terms:
                return f
    raise FaceMissing(f"section {s.label!r} is not defined on face {x.face!r}")


def evaluate_log_norm(s: TropicalSection, x: SkeletonPoint, skeleton: Skeleton | None = None):
    """``max_i <p_i, x> - a_i`` on the face of ``x``; exact for rational ``x``.

    Points on lower faces are evaluated through an incident top face when the
    skeleton is supplied.
    """
    return s.value(_resolve_face(s, x, skeleton), x.coords)


def gradient_at(s: TropicalSection, y: SkeletonPoint, skeleton: Skeleton | None = None) -> set:
    return s.gradients_at(_resolve_face(s, y, skeleton), rq.to_vector(y.coords))


def multiply_sections(s1: TropicalSection, s2: TropicalSection, skeleton: Skeleton | None = None) -> TropicalSection:
    """Product section: pairwise sums of terms, pruned to the contributing ones."""
    if set(s1.terms) != set(s2.terms):
        raise FaceMismatch("sections are defined on different faces")
    faces = {}
    for f in s1.terms:
        faces[f] = [
            MonomialTerm(tuple(a + b for a, b in zip(t1.gradient, t2.gradient)), t1.shift + t2.shift)
            for t1 in s1.terms[f]
            for t2 in s2.terms[f]
        ]
    return make_section(s1.degree + s2.degree, faces, f"{s1.label}*{s2.label}", skeleton)


def check_continuity(s: TropicalSection, skeleton: Skeleton, tol: float = 1e-9) -> list[str]:
    """Compare values across shared lower faces and gluings (twist included).

    Sample points are the vertices and barycenter of each shared face. Returns
    a list of human-readable failures; empty means continuous.
    """
    failures = []

    def samples(fid):
        verts = skeleton.faces[fid].vertices
        bary = tuple(sum(v[i] for v in verts) / len(verts) for i in range(skeleton.n))
        return list(verts) + [bary]

    for fid, tops in skeleton.incidence.items():
        tops = [t for t in tops if t in s.terms]
        if len(tops) < 2:
            continue
        for x in samples(fid):
            vals = [s.value(t, x) for t in tops]
            if max(vals) - min(vals) > tol:
                failures.append(f"{s.label}: jump on shared face {fid} at {x}")
    for g in skeleton.gluings:
        src = [t for t in skeleton.incidence.get(g.source, ()) if t in s.terms]
        dst = [t for t in skeleton.incidence.get(g.target, ()) if t in s.terms]
        if not src or not dst:
            continue
        for x in samples(g.source):
            lhs = s.value(dst[0], g.apply(x))
            rhs = s.value(src[0], x) + g.twist(x, s.degree)
            if abs(lhs - rhs) > tol:
                failures.append(f"{s.label}: gluing {g.source}->{g.target} mismatch {float(lhs - rhs):.3g} at {x}")
    return failures


@dataclass(frozen=True)
class DegreeBasis:
    degree: int
    sections: tuple
    validated: bool = False

    def __post_init__(self):
        for s in self.sections:
            if s.degree != self.degree:
                raise DegreeMismatch(f"section {s.label!r} has degree {s.degree}, basis has {self.degree}")

    def __len__(self) -> int:
        return len(self.sections)

    @property
    def faces(self) -> list[str]:
        return sorted({f for s in self.sections for f in s.terms})


# -- walls and chambers -------------------------------------------------------


@dataclass(frozen=True)
class Wall:
    face: str
    normal: tuple
    offset: Fraction


@dataclass(frozen=True)
class Chamber:
    face: str
    vertices: tuple
    representative: tuple
    choice: tuple  # index of the leading term of each section

    def contains(self, x: Sequence, strict: bool = True) -> bool:
        from .polytope import convex_hull

        return convex_hull(self.vertices).contains(x, strict=strict)


@dataclass(frozen=True)
class WallComplex:
    degree: int
    walls: tuple
    chambers: tuple
    lower_faces: tuple = ()


class _Region:
    """Exact convex region inside a top face, refined by successive cuts."""

    def __init__(self, poly: Polytope, state=None, cuts=()):
        self.poly = poly
        self.n = poly.n
        self.cuts = list(cuts)
        if state is None:
            if self.n == 1:
                lo, hi = poly.bounding_box()
                state = (lo[0], hi[0])
            elif self.n == 2:
                state = [tuple(v) for v in poly.ordered_vertices_2d()]
            else:
                state = list(poly.vertices)
        self.state = state

    def cut(self, halfspaces) -> "_Region | None":
        """Intersect with halfspaces; None unless the result has nonempty interior."""
        if self.n == 1:
            a_, b_ = self.state
            for a, b in halfspaces:
                if a[0] > 0:
                    b_ = min(b_, b / a[0])
                elif a[0] < 0:
                    a_ = max(a_, b / a[0])
                elif b < 0:
                    return None
            return _Region(self.poly, (a_, b_)) if a_ < b_ else None
        if self.n == 2:
            ring = self.state
            for a, b in halfspaces:
                if a[0] == 0 and a[1] == 0:
                    if b < 0:
                        return None
                    continue
                ring = clip_polygon(ring, a, b)
                if len(ring) < 3:
                    return None
            return _Region(self.poly, ring) if polygon_area(ring) != 0 else None
        cuts = self.cuts + list(halfspaces)
        verts = region_vertices(self.poly, cuts)
        if len(verts) <= self.n or rq.affine_rank(verts) < self.n:
            return None
        return _Region(self.poly, verts, cuts)

    @property
    def vertices(self) -> tuple:
        if self.n == 1:
            return ((self.state[0],), (self.state[1],))
        seen = dict.fromkeys(tuple(v) for v in self.state)
        return tuple(seen)

    @property
    def representative(self) -> tuple:
        vs = self.vertices
        return tuple(sum(v[i] for v in vs) / len(vs) for i in range(self.n))


def _face_chambers(face: str, poly: Polytope, sections: Sequence[TropicalSection]) -> list[Chamber]:
    regions = [(_Region(poly), ())]
    for s in sections:
        ts = s.face_terms(face)
        if len(ts) == 1:
            regions = [(r, ch + (0,)) for r, ch in regions]
            continue
        cuts = [linearity_halfspaces(ts, i) for i in range(len(ts))]
        nxt = []
        for r, ch in regions:
            for i, hs in enumerate(cuts):
                sub = r.cut(hs)
                if sub is not None:
                    nxt.append((sub, ch + (i,)))
        regions = nxt
    chambers = [Chamber(face, r.vertices, r.representative, ch) for r, ch in regions]
    return sorted(chambers, key=lambda c: c.representative)


def _face_walls(face: str, poly: Polytope, sections: Sequence[TropicalSection]) -> set:
    n = poly.n
    walls = set()
    for s in sections:
        ts = s.face_terms(face)
        for i, k in combinations(range(len(ts)), 2):
            normal, offset = rq.primitive(
                tuple(Fraction(a - b) for a, b in zip(ts[k].gradient, ts[i].gradient)), ts[k].shift - ts[i].shift
            )
            if (normal, offset) in walls or all(c == 0 for c in normal):
                continue
            hs = linearity_halfspaces(ts, i) + linearity_halfspaces(ts, k)
            verts = region_vertices(poly, hs)
            if verts and rq.affine_rank(verts) == n - 1:
                walls.add((normal, offset))
    return walls


def wall_complex(b: DegreeBasis, skeleton: Skeleton, workers: int | None = None) -> WallComplex:
    """Corner-locus walls and chambers of all sections, per top face.

    Chambers are ordered by face id, then by representative point.
    """
    from .parallel import ordered_map

    faces = [f for f in skeleton.top_faces if all(f in s.terms for s in b.sections)]

    def per_face(f):
        poly = skeleton.faces[f].polytope
        return _face_chambers(f, poly, b.sections), _face_walls(f, poly, b.sections)

    results = ordered_map(per_face, faces, workers)
    chambers, walls = [], []
    for f, (ch, ws) in zip(faces, results):
        chambers.extend(ch)
        walls.extend(Wall(f, nv, off) for nv, off in sorted(ws))
    return WallComplex(b.degree, tuple(walls), tuple(chambers), tuple(skeleton.lower_faces()))


@dataclass(frozen=True)
class Verdict:
    valid: bool
    degree: int
    chamber: Chamber | None = None
    pair: tuple | None = None
    gradient: tuple | None = None
    n_chambers: int = 0
    basis: DegreeBasis | None = field(default=None, compare=False, repr=False)


def check_valuative_independence(b: DegreeBasis, skeleton: Skeleton, wc: WallComplex | None = None) -> Verdict:
    """Valid iff the leading gradients of all sections are distinct on every chamber."""
    wc = wc if wc is not None else wall_complex(b, skeleton)
    for ch in wc.chambers:
        seen: dict[tuple, int] = {}
        for idx, (s, i) in enumerate(zip(b.sections, ch.choice)):
            g = s.face_terms(ch.face)[i].gradient
            if g in seen:
                other = b.sections[seen[g]]
                return Verdict(False, b.degree, ch, (other.label, s.label), g, len(wc.chambers))
            seen[g] = idx
    return Verdict(True, b.degree, n_chambers=len(wc.chambers), basis=replace(b, validated=True))


def leading_gradients(b: DegreeBasis, face: str, x: Sequence) -> list[set]:
    return [s.gradients_at(face, x) for s in b.sections]


def walls_through(y: SkeletonPoint, bases: Iterable[DegreeBasis]) -> list[tuple[int, str]]:
    """(degree, label) of every section whose corner locus contains ``y``."""
    x = rq.to_vector(y.coords)
    out = []
    for b in bases:
        for s in b.sections:
            if y.face in s.terms and len(s.gradients_at(y.face, x)) > 1:
                out.append((b.degree, s.label))
    return out


def is_sufficiently_irrational(y: SkeletonPoint, family, l_max: int | None = None, skeleton: Skeleton | None = None) -> bool:
    """Exact test: ``y`` is interior to a top face and on no wall of degree <= l_max.

    Floating coordinates are converted exactly, so the answer refers to the
    binary rational actually stored.
    """
    skeleton = skeleton if skeleton is not None else getattr(family, "skeleton", None)
    if skeleton is not None:
        yq = SkeletonPoint(y.face, rq.to_vector(y.coords))
        if not skeleton.is_interior(yq):
            return False
    return not walls_through(y, _bases_upto(family, l_max))


def _bases_upto(family, l_max: int | None):
    if isinstance(family, DegreeBasis):
        return [family]
    if isinstance(family, BasisFamily):
        top = family.l_max if l_max is None else min(l_max, family.l_max)
        return [family.basis(l) for l in range(1, top + 1)]
    return [b for b in family if l_max is None or b.degree <= l_max]


def lipschitz_constant(family, l_max: int | None = None) -> float:
    """Largest gradient sup-norm divided by degree over all sections."""
    bases = _bases_upto(family, l_max)
    if not bases:
        raise ValueError("empty basis family")
    return max(Fraction(s.max_gradient_norm, b.degree) for b in bases for s in b.sections)


# -- families -------------------------------------------------------------------


class BasisFamily:
    """Lazily generated bases of degrees 1..l_max with a thread-safe cache."""

    def __init__(
        self,
        skeleton: Skeleton,
        builder: Callable[[int], DegreeBasis],
        l_max: int,
        Ln: Fraction | None = None,
        name: str = "",
    ):
        self.skeleton = skeleton
        self.n = skeleton.n
        self._builder = builder
        self.l_max = int(l_max)
        self.Ln = None if Ln is None else Fraction(Ln)
        self.name = name
        self._cache: dict[int, DegreeBasis] = {}
        self._lock = threading.Lock()

    def basis(self, l: int) -> DegreeBasis:
        if not 1 <= l <= self.l_max:
            raise DegreeMismatch(f"degree {l} outside 1..{self.l_max}")
        with self._lock:
            if l not in self._cache:
                b = self._builder(l)
                if b.degree != l:
                    raise DegreeMismatch(f"builder returned degree {b.degree} for {l}")
                self._cache[l] = b
            return self._cache[l]

    def degrees(self) -> list[int]:
        return [l for l in range(1, self.l_max + 1) if self.has_degree(l)]

    def has_degree(self, l: int) -> bool:
        try:
            self.basis(l)
        except (DegreeMismatch, KeyError):
            return False
        return True

    def with_l_max(self, l_max: int) -> "BasisFamily":
        fam = BasisFamily(self.skeleton, self._builder, l_max, self.Ln, self.name)
        fam._cache = {k: v for k, v in self._cache.items() if k <= l_max}
        return fam

    @classmethod
    def from_bases(cls, skeleton: Skeleton, bases: Sequence[DegreeBasis], Ln=None, name: str = "file"):
        table = {b.degree: b for b in bases}

        def builder(l):
            if l not in table:
                raise DegreeMismatch(f"no basis of degree {l} supplied")
            return table[l]

        return cls(skeleton, builder, max(table), Ln, name)


# -- serialization ----------------------------------------------------------------


def basis_from_dict(d: Mapping, skeleton: Skeleton | None = None) -> DegreeBasis:
    try:
        degree = int(d["degree"])
        sections = []
        for i, raw in enumerate(d["sections"]):
            faces = {
                str(f): [term(t["p"], t.get("a", "0/1")) for t in ts] for f, ts in raw["faces"].items()
            }
            sections.append(make_section(degree, faces, str(raw.get("label", i)), skeleton))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise MalformedInput(f"bad basis document: {exc}", "$.sections") from exc
    return DegreeBasis(degree, tuple(sections))


def basis_to_dict(b: DegreeBasis) -> dict:
    return {
        "degree": b.degree,
        "sections": [
            {
                "label": s.label,
                "faces": {
                    f: [{"p": list(t.gradient), "a": rq.fmt_fraction(t.shift)} for t in ts]
                    for f, ts in sorted(s.terms.items())
                },
            }
            for s in b.sections
        ],
    }
