"""Polyhedral skeletons with integral affine charts, gluings and measures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import rational as rq
from .errors import DegenerateFace, FaceMissing, InconsistentGluing, MalformedInput, ZeroMass
from .polytope import Polytope, box_intersection_volume, convex_hull, face_lattice
from .rational import Vector

POINT_TOL = 1e-12


@dataclass(frozen=True)
class IntegralAffineFace:
    id: str
    vertices: tuple
    dim: int
    polytope: Polytope = field(compare=False, repr=False)

    @property
    def chart_vertices(self) -> tuple:
        return self.vertices

    @property
    def lattice_rank(self) -> int:
        return self.dim


@dataclass(frozen=True)
class Gluing:
    """Integral affine identification ``x -> linear @ x + translate`` of two faces.

    ``twist`` is the per-unit-degree cocycle of the line bundle across the
    gluing: a degree-l section satisfies
    ``f(target point) = f(source point) + l * (<twist_p, x> - twist_a)``.
    """

    source: str
    target: str
    linear: tuple
    translate: Vector
    twist_p: tuple = ()
    twist_a: Fraction = Fraction(0)

    def apply(self, x: Sequence) -> Vector:
        x = rq.to_vector(x)
        return tuple(rq.dot(row, x) + t for row, t in zip(self.linear, self.translate))

    def inverse(self, y: Sequence) -> Vector:
        y = rq.to_vector(y)
        shifted = rq.sub(y, self.translate)
        return rq.solve(self.linear, shifted)

    def twist(self, x: Sequence, degree: int) -> Fraction:
        if not self.twist_p:
            return degree * (-self.twist_a)
        return degree * (rq.dot(self.twist_p, rq.to_vector(x)) - self.twist_a)


@dataclass(frozen=True)
class SkeletonPoint:
    face: str
    coords: tuple

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (Fraction, int)) for c in self.coords)

    def as_fraction(self) -> Vector:
        return rq.to_vector(self.coords)

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])


@dataclass(frozen=True)
class Skeleton:
    n: int
    faces: Mapping[str, IntegralAffineFace]
    gluings: tuple
    incidence: Mapping[str, tuple]
    top_faces: tuple

    def face(self, face_id: str) -> IntegralAffineFace:
        try:
            return self.faces[face_id]
        except KeyError:
            raise FaceMissing(f"unknown face {face_id!r}") from None

    def point(self, face_id: str, coords: Sequence) -> SkeletonPoint:
        face = self.face(face_id)
        if len(coords) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(coords)}")
        exact = all(isinstance(c, (Fraction, int, str)) for c in coords)
        if exact:
            cs = rq.to_vector(coords)
            if face.dim == self.n:
                if not face.polytope.contains(cs):
                    raise ValueError(f"point {coords} lies outside face {face_id}")
            elif cs not in set(_points_of(face)) and face.dim == 0:
                raise ValueError(f"point {coords} is not the vertex {face_id}")
            return SkeletonPoint(face_id, cs)
        cs = tuple(float(c) for c in coords)
        if face.dim == self.n and not face.polytope.contains_float(np.array(cs), tol=POINT_TOL)[0]:
            raise ValueError(f"point {coords} lies outside face {face_id}")
        return SkeletonPoint(face_id, cs)

    def is_interior(self, pt: SkeletonPoint) -> bool:
        face = self.face(pt.face)
        if face.dim != self.n:
            return False
        if pt.exact:
            return face.polytope.contains(pt.as_fraction(), strict=True)
        return bool(face.polytope.contains_float(pt.as_float(), strict=True)[0])

    def lower_faces(self) -> list[str]:
        return [f for f in self.faces if self.faces[f].dim < self.n]


def _points_of(face: IntegralAffineFace):
    return face.vertices


def _parse_vertices(raw, path: str) -> list[Vector]:
    try:
        return [rq.to_vector(v) for v in raw]
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise MalformedInput(f"bad vertex coordinates: {exc}", path) from exc


def build_skeleton(spec: Mapping) -> Skeleton:
    """Validate a skeleton description and derive its lower faces and incidence.

    Faces are listed by their chart vertices in one ambient coordinate system.
    Boundary faces of every top face are generated automatically; listed
    lower faces must coincide with one of them and keep their given id.
    """
    if not isinstance(spec, Mapping) or "n" not in spec or "faces" not in spec:
        raise MalformedInput("skeleton spec needs 'n' and 'faces'", "$")
    n = spec["n"]
    if not isinstance(n, int) or n < 1:
        raise MalformedInput("'n' must be a positive integer", "$.n")

    listed: dict[str, IntegralAffineFace] = {}
    for i, raw in enumerate(spec["faces"]):
        path = f"$.faces[{i}]"
        if "id" not in raw or "vertices" not in raw:
            raise MalformedInput("face needs 'id' and 'vertices'", path)
        fid = str(raw["id"])
        verts = _parse_vertices(raw["vertices"], path + ".vertices")
        if not verts or any(len(v) != n for v in verts):
            raise MalformedInput(f"face vertices must have {n} coordinates", path)
        if len(set(verts)) != len(verts):
            raise DegenerateFace(f"face {fid} repeats a vertex")
        poly = convex_hull(verts)
        if len(poly.vertices) != len(verts):
            raise DegenerateFace(f"face {fid}: vertices are affinely dependent / not in convex position")
        if "dim" in raw and raw["dim"] != poly.dim:
            raise DegenerateFace(f"face {fid}: declared dim {raw['dim']} but vertices span {poly.dim}")
        if fid in listed:
            raise MalformedInput(f"duplicate face id {fid}", path)
        listed[fid] = IntegralAffineFace(fid, tuple(sorted(verts)), poly.dim, poly)

    tops = sorted(f for f, face in listed.items() if face.dim == n)
    if not tops:
        raise MalformedInput("no top-dimensional face: the skeleton must have dimension n", "$.faces")

    by_vertices = {frozenset(f.vertices): f.id for f in listed.values()}
    faces: dict[str, IntegralAffineFace] = {f: listed[f] for f in tops}
    incidence: dict[str, list[str]] = {f: [f] for f in tops}
    for t in tops:
        for k, (dim, vset) in enumerate(face_lattice(listed[t].vertices)):
            if dim == n:
                continue
            fid = by_vertices.get(vset)
            if fid is None:
                fid = f"{t}/{k}"
                by_vertices[vset] = fid
            if fid not in faces:
                verts = tuple(sorted(vset))
                faces[fid] = IntegralAffineFace(fid, verts, dim, convex_hull(verts))
            incidence.setdefault(fid, [])
            if t not in incidence[fid]:
                incidence[fid].append(t)
    for fid in listed:
        if fid not in faces:
            raise MalformedInput(f"face {fid} is not a face of any top-dimensional face", "$.faces")

    gluings = []
    for i, raw in enumerate(spec.get("gluings", [])):
        path = f"$.gluings[{i}]"
        try:
            src, dst = str(raw["from"]), str(raw["to"])
            linear = tuple(tuple(int(x) for x in row) for row in raw["linear"])
            translate = rq.to_vector(raw["translate"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"gluing needs from/to/linear/translate: {exc}", path) from exc
        if src not in faces or dst not in faces:
            raise MalformedInput(f"gluing refers to unknown face {src!r} or {dst!r}", path)
        if len(linear) != n or any(len(r) != n for r in linear) or len(translate) != n:
            raise MalformedInput("gluing linear part must be n x n and translate length n", path)
        if abs(rq.det(linear)) != 1:
            raise InconsistentGluing(f"gluing {src}->{dst}: linear part is not unimodular")
        twist_p: tuple = ()
        twist_a = Fraction(0)
        if "twist" in raw:
            tw = raw["twist"]
            twist_p = tuple(int(x) for x in tw.get("p", [0] * n))
            twist_a = rq.to_fraction(tw.get("a", "0"))
        g = Gluing(src, dst, linear, translate, twist_p, twist_a)
        image = frozenset(g.apply(v) for v in faces[src].vertices)
        if image != frozenset(faces[dst].vertices):
            raise InconsistentGluing(f"gluing {src}->{dst} does not map vertices onto vertices")
        gluings.append(g)

    return Skeleton(
        n=n,
        faces=faces,
        gluings=tuple(gluings),
        incidence={k: tuple(v) for k, v in incidence.items()},
        top_faces=tuple(tops),
    )


def skeleton_to_spec(s: Skeleton) -> dict:
    faces = [
        {"id": f.id, "vertices": [[rq.fmt_fraction(c) for c in v] for v in f.vertices]}
        for f in s.faces.values()
        if f.dim == s.n
    ]
    glued = {g.source for g in s.gluings} | {g.target for g in s.gluings}
    faces += [
        {"id": fid, "vertices": [[rq.fmt_fraction(c) for c in v] for v in s.faces[fid].vertices]}
        for fid in sorted(glued)
        if s.faces[fid].dim < s.n
    ]
    gl = []
    for g in s.gluings:
        d = {
            "from": g.source,
            "to": g.target,
            "linear": [list(r) for r in g.linear],
            "translate": [rq.fmt_fraction(t) for t in g.translate],
        }
        if g.twist_p or g.twist_a:
            d["twist"] = {"p": list(g.twist_p) or [0] * s.n, "a": rq.fmt_fraction(g.twist_a)}
        gl.append(d)
    return {"n": s.n, "faces": faces, "gluings": gl}


def load_skeleton(path) -> Skeleton:
    from .io import read_json

    return build_skeleton(read_json(path))


def unit_cube(n: int, face_id: str = "F") -> Skeleton:
    verts = [[str((i >> k) & 1) for k in range(n)] for i in range(2**n)]
    return build_skeleton({"n": n, "faces": [{"id": face_id, "vertices": verts}]})


# -- measures -----------------------------------------------------------------


@dataclass(frozen=True)
class DensityPiece:
    lo: Vector
    hi: Vector
    value: Fraction


@dataclass(frozen=True)
class SkeletonMeasure:
    """Piecewise-constant probability density on the top faces.

    Each top face carries a list of axis-aligned boxes (clipped to the face)
    with constant density values; lower faces carry no mass.
    """

    skeleton: Skeleton
    pieces: Mapping[str, tuple]

    @property
    def total_mass(self) -> Fraction:
        total = Fraction(0)
        for fid, ps in self.pieces.items():
            poly = self.skeleton.faces[fid].polytope
            for p in ps:
                total += p.value * box_intersection_volume(p.lo, p.hi, poly, exact=True)
        return total

    @property
    def densities(self) -> Mapping[str, tuple]:
        return self.pieces

    def face_mass(self, face_id: str) -> float:
        poly = self.skeleton.faces[face_id].polytope
        return float(
            sum(p.value * box_intersection_volume(p.lo, p.hi, poly, exact=True) for p in self.pieces.get(face_id, ()))
        )

    def box_mass(self, face_id: str, lo: Sequence[float], hi: Sequence[float]) -> float:
        poly = self.skeleton.faces[face_id].polytope
        out = 0.0
        for p in self.pieces.get(face_id, ()):
            blo = [max(float(a), float(b)) for a, b in zip(lo, p.lo)]
            bhi = [min(float(a), float(b)) for a, b in zip(hi, p.hi)]
            if any(b <= a for a, b in zip(blo, bhi)):
                continue
            out += float(p.value) * float(box_intersection_volume(blo, bhi, poly))
        return out

    def density_at(self, face_id: str, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(len(x))
        for p in self.pieces.get(face_id, ()):
            lo = np.array([float(v) for v in p.lo])
            hi = np.array([float(v) for v in p.hi])
            inside = np.all((x >= lo) & (x <= hi), axis=1)
            out = np.where(inside & (out == 0), float(p.value), out)
        return out


def lebesgue_measure(s: Skeleton, density: Mapping | None = None) -> SkeletonMeasure:
    """Normalized piecewise-constant measure; uniform Lebesgue when ``density`` is None.

    ``density`` maps top-face ids to either a constant or a list of
    ``{"lo": [...], "hi": [...], "value": v}`` boxes. Faces absent from the
    mapping carry zero density.
    """
    raw: dict[str, list[DensityPiece]] = {}
    if density is None:
        density = {f: 1 for f in s.top_faces}
    for fid, spec in density.items():
        face = s.face(fid)
        if face.dim != s.n:
            raise ValueError(f"face {fid} has dimension < n and cannot carry mass")
        lo, hi = face.polytope.bounding_box()
        pieces = []
        if isinstance(spec, (int, float, Fraction, str)):
            pieces.append(DensityPiece(lo, hi, rq.to_fraction(spec)))
        else:
            for item in spec:
                pieces.append(
                    DensityPiece(rq.to_vector(item["lo"]), rq.to_vector(item["hi"]), rq.to_fraction(item["value"]))
                )
        for p in pieces:
            if p.value < 0:
                raise ValueError("density values must be nonnegative")
        raw[fid] = pieces
    total = Fraction(0)
    for fid, ps in raw.items():
        poly = s.faces[fid].polytope
        for p in ps:
            total += p.value * box_intersection_volume(p.lo, p.hi, poly, exact=True)
    if total == 0:
        raise ZeroMass("density integrates to zero")
    norm = {fid: tuple(DensityPiece(p.lo, p.hi, p.value / total) for p in ps) for fid, ps in raw.items()}
    return SkeletonMeasure(s, norm)


# -- quadrature grids -----------------------------------------------------------


@dataclass(frozen=True)
class SkeletonGrid:
    """Midpoint grid on the top faces: nodes, owning face, cell boxes and mu-weights."""

    h: float
    points: np.ndarray
    face_index: np.ndarray
    face_ids: tuple
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    def on_face(self, face_id: str) -> np.ndarray:
        return self.face_index == self.face_ids.index(face_id)


def _axis_cells(lo: float, hi: float, h: float):
    m = max(1, int(np.ceil((hi - lo) / h - 1e-9)))
    edges = lo + h * np.arange(m + 1)
    edges[-1] = hi
    return edges[:-1], edges[1:]


def skeleton_grid(measure: SkeletonMeasure, h: float) -> SkeletonGrid:
    if not h > 0:
        raise ValueError("grid resolution h must be positive")
    s = measure.skeleton
    pts, fidx, clo, chi, wts = [], [], [], [], []
    for k, fid in enumerate(s.top_faces):
        poly = s.faces[fid].polytope
        lo, hi = poly.bounding_box()
        axes = [_axis_cells(float(a), float(b), h) for a, b in zip(lo, hi)]
        mesh_lo = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), axis=-1).reshape(-1, s.n)
        mesh_hi = np.stack(np.meshgrid(*[a[1] for a in axes], indexing="ij"), axis=-1).reshape(-1, s.n)
        if poly.is_box():
            vol = np.prod(mesh_hi - mesh_lo, axis=1)
            centers = 0.5 * (mesh_lo + mesh_hi)
            weights = np.zeros(len(centers))
            for p in measure.pieces.get(fid, ()):
                plo = np.array([float(v) for v in p.lo])
                phi = np.array([float(v) for v in p.hi])
                ov = np.clip(np.minimum(mesh_hi, phi) - np.maximum(mesh_lo, plo), 0.0, None)
                weights += float(p.value) * np.prod(ov, axis=1)
            keep = vol > 0
        else:
            centers, weights, keep = [], [], []
            for a, b in zip(mesh_lo, mesh_hi):
                v = float(box_intersection_volume(a, b, poly))
                keep.append(v > 1e-15)
                c = 0.5 * (a + b)
                if v > 0 and not poly.contains_float(c)[0] and s.n == 2:
                    from .polytope import clip_box, halfspaces_ring, polygon_centroid

                    ring = clip_box(halfspaces_ring(poly, as_float=True), a, b)
                    c = np.array(polygon_centroid(ring))
                centers.append(c)
                weights.append(measure.box_mass(fid, a, b))
            centers, weights, keep = np.array(centers), np.array(weights), np.array(keep)
        pts.append(centers[keep])
        clo.append(mesh_lo[keep])
        chi.append(mesh_hi[keep])
        wts.append(weights[keep])
        fidx.append(np.full(int(keep.sum()), k))
    return SkeletonGrid(
        h=h,
        points=np.concatenate(pts),
        face_index=np.concatenate(fidx),
        face_ids=s.top_faces,
        cell_lo=np.concatenate(clo),
        cell_hi=np.concatenate(chi),
        weights=np.concatenate(wts),
    )


def integrate(m: SkeletonMeasure, f: Callable, h: float) -> float:
    """Midpoint-rule integral of ``f(coords, face_id)`` against ``m``.

    The rule is exact for functions affine on each grid cell and has error
    O(h^2) for functions that are Lipschitz and piecewise smooth with kinks on
    cell boundaries; a kink inside a cell contributes O(h^2) per cell crossed.
    """
    grid = skeleton_grid(m, h)
    total = 0.0
    for k, fid in enumerate(grid.face_ids):
        mask = grid.face_index == k
        if not mask.any():
            continue
        vals = np.asarray(f(grid.points[mask], fid), dtype=float)
        total += float(np.dot(grid.weights[mask], vals))
    return total


def skeleton_from_json_text(text: str) -> Skeleton:
    try:
        return build_skeleton(json.loads(text))
    except json.JSONDecodeError as exc:
        raise MalformedInput(exc.msg, f"{exc.lineno}:{exc.colno}") from exc


@dataclass(frozen=True)
class NodeGrid:
    """Lattice nodes lo + h k on the top faces, boundary included; used for suprema."""

    h: float
    points: np.ndarray
    face_index: np.ndarray
    face_ids: tuple

    def __len__(self) -> int:
        return len(self.points)


def node_grid(s: Skeleton, h: float) -> NodeGrid:
    if not h > 0:
        raise ValueError("grid resolution h must be positive")
    pts, fidx = [], []
    for k, fid in enumerate(s.top_faces):
        poly = s.faces[fid].polytope
        lo, hi = poly.bounding_box()
        axes = []
        for a, b in zip(lo, hi):
            m = max(1, int(round((float(b) - float(a)) / h)))
            axes.append(np.linspace(float(a), float(b), m + 1))
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, s.n)
        keep = poly.contains_float(mesh, tol=1e-12)
        pts.append(mesh[keep])
        fidx.append(np.full(int(keep.sum()), k))
    return NodeGrid(h, np.concatenate(pts), np.concatenate(fidx), s.top_faces)
