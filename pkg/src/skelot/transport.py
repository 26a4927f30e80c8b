"""Semi-discrete Kantorovich solver for the skeleton Monge-Ampere equation.

The potential is ``phi(x) = max_j c(x, p_j) - psi_j`` over body samples p_j.
For fixed p each cost is a maximum of affine functions of x, so phi is the
upper envelope of the affine family ``<G_k, x> + c_k - psi_{owner(k)}``. Cells
are computed exactly from that envelope in dimension 1 (sorted lines) and 2
(polygon clipping); other dimensions fall back to grid quadrature.

The dual functional ``G(psi) = sum_j nu_j psi_j + int phi dmu`` is convex with
gradient ``nu_j - mu(cell_j)`` and a graph-Laplacian Hessian, which the damped
Newton method uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import rational as rq
from .cost import AffineDomain, Anchor, CostField, affine_domain
from .errors import DimensionNot1, NonConvergence, PNotInBody, ShrunkToPoint
from .okounkov import BodyMeasure, gradient_semigroup, okounkov_body
from .polytope import clip_box, clip_polygon, convex_hull, polygon_area, polygon_centroid
from .skeleton import SkeletonMeasure, SkeletonPoint, node_grid, skeleton_grid
from .tropical import BasisFamily, is_sufficiently_irrational

CHUNK = 512


class DegenerateCell(Exception):
    """A target sample with positive weight lost its whole cell during a trial step."""


@dataclass(frozen=True)
class DualWeights:
    psi: np.ndarray
    gauge: str = "min=0"

    @staticmethod
    def normalized(psi: np.ndarray) -> "DualWeights":
        psi = np.asarray(psi, dtype=float)
        return DualWeights(psi - psi.min())


@dataclass
class PieceTable:
    """Affine pieces of all costs c(., p_j): rows ``<G_k, x> + c_k`` owned by sample ``owner_k``."""

    G: np.ndarray
    c: np.ndarray
    owner: np.ndarray

    @classmethod
    def build(cls, cf: CostField, samples: np.ndarray, face_ring=None) -> "PieceTable":
        """Collect pieces, dropping those never active for their own sample on the face.

        ``face_ring`` is the face as an interval (n = 1) or polygon (n = 2);
        without it nothing is pruned.
        """
        Gs, cs, ow = [], [], []
        for j, p in enumerate(samples):
            g, c = cf.pieces(p)
            if face_ring is not None and len(c) > 1:
                keep = [r for r in range(len(c)) if _piece_active(g, c, r, face_ring)]
                g, c = g[keep], c[keep]
            Gs.append(g)
            cs.append(c)
            ow.append(np.full(len(c), j))
        return cls(np.concatenate(Gs), np.concatenate(cs), np.concatenate(ow))

    def duplicate_samples(self) -> list[tuple[int, int]]:
        """Pairs of samples whose costs are the same function of x."""
        seen: dict[bytes, int] = {}
        out = []
        for j in np.unique(self.owner):
            rows = np.column_stack([self.G[self.owner == j], self.c[self.owner == j]])
            key = np.round(rows[np.lexsort(rows.T[::-1])], 12).tobytes()
            if key in seen:
                out.append((seen[key], int(j)))
            else:
                seen[key] = int(j)
        return out


def _piece_active(G: np.ndarray, c: np.ndarray, r: int, ring) -> bool:
    """Whether piece r attains the max of its own family on a set of positive measure."""
    if G.shape[1] == 1:
        a, b = ring
        for r2 in range(len(c)):
            if r2 == r:
                continue
            s = G[r2, 0] - G[r, 0]
            rhs = c[r] - c[r2]
            if s == 0:
                if rhs < 0 or (rhs == 0 and r2 < r):
                    return False
            elif s > 0:
                b = min(b, rhs / s)
            else:
                a = max(a, rhs / s)
            if b <= a:
                return False
        return True
    poly = list(ring)
    for r2 in range(len(c)):
        if r2 == r:
            continue
        d = G[r2] - G[r]
        rhs = c[r] - c[r2]
        if not np.any(d):
            if rhs < 0 or (rhs == 0 and r2 < r):
                return False
            continue
        poly = clip_polygon(poly, d, rhs)
        if len(poly) < 3 or abs(polygon_area(poly)) <= 0:
            return False
    return True


def _face_ring(skeleton, face: str):
    poly = skeleton.faces[face].polytope
    if skeleton.n == 1:
        lo, hi = poly.bounding_box()
        return (float(lo[0]), float(hi[0]))
    if skeleton.n == 2:
        return [(float(x), float(y)) for x, y in poly.ordered_vertices_2d()]
    return None


@dataclass
class PotentialPc:
    """``phi(x) = max_j c(x, p_j) - psi_j``; ties go to the lowest sample index."""

    weights: DualWeights
    cf: CostField
    samples: np.ndarray
    table: PieceTable = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is None:
            self.table = PieceTable.build(self.cf, self.samples)

    @property
    def psi(self) -> np.ndarray:
        return self.weights.psi

    def with_psi(self, psi: np.ndarray) -> "PotentialPc":
        return PotentialPc(DualWeights.normalized(psi), self.cf, self.samples, self.table)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        t = self.table
        return X @ t.G.T + (t.c - self.psi[t.owner])[None, :]

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X))
        for s in range(0, len(X), CHUNK):
            out[s : s + CHUNK] = np.max(self._scores(X[s : s + CHUNK]), axis=1)
        return out

    def argmax(self, X: np.ndarray) -> np.ndarray:
        """Winning sample per row; lowest sample index among exact ties."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X), dtype=int)
        t = self.table
        for s in range(0, len(X), CHUNK):
            sc = self._scores(X[s : s + CHUNK])
            best = sc.max(axis=1, keepdims=True)
            owners = np.where(sc == best, t.owner[None, :], np.iinfo(np.int64).max)
            out[s : s + CHUNK] = owners.min(axis=1)
        return out

    def active_gradients(self, x: Sequence[float], tol: float = 1e-12) -> tuple[np.ndarray, bool, int]:
        """(gradient of the winning piece, multi-gradient flag, winning sample)."""
        x = np.asarray(x, dtype=float)
        sc = self._scores(x[None, :])[0]
        best = sc.max()
        near = np.flatnonzero(sc >= best - tol)
        grads = np.unique(np.round(self.table.G[near], 12), axis=0)
        k = near[np.argmin(self.table.owner[near])]
        return self.table.G[k], len(grads) > 1, int(self.table.owner[k])


# -- exact cells ------------------------------------------------------------------------


@dataclass
class LaguerreDecomposition:
    """Cells ``{x : argmax = j}`` with masses; ``segments`` (1-D) or ``polygons`` (2-D) when exact."""

    masses: np.ndarray
    method: str
    integral_phi: float
    segments: list = field(default_factory=list)  # (a, b, owner, slope, intercept)
    polygons: list = field(default_factory=list)  # (ring, owner, piece)
    hessian: sp.csr_matrix | None = None
    grid_argmax: np.ndarray | None = None
    h: float | None = None

    def boundaries_1d(self) -> list[tuple[float, int, int]]:
        """Points where the owning sample changes: (x, left owner, right owner)."""
        out = []
        for s0, s1 in zip(self.segments, self.segments[1:]):
            if s0[2] != s1[2]:
                out.append((s0[1], s0[2], s1[2]))
        return out


def _face_of(mu: SkeletonMeasure, cf: CostField) -> str:
    face = cf.anchor.face
    for f, ps in mu.pieces.items():
        if f != face and any(p.value > 0 for p in ps):
            raise ValueError("the transport solver needs mu supported on the anchor face")
    return face


def _pieces_float(mu: SkeletonMeasure, face: str):
    out = []
    for p in mu.pieces.get(face, ()):
        out.append((np.array([float(v) for v in p.lo]), np.array([float(v) for v in p.hi]), float(p.value)))
    return out


def _density_1d(pieces, x: float) -> float:
    left = right = 0.0
    for lo, hi, v in pieces:
        if lo[0] <= x < hi[0]:
            right = v
        if lo[0] < x <= hi[0]:
            left = v
    return 0.5 * (left + right)


def _envelope_1d(slopes, intercepts, owner, lo: float, hi: float):
    order = np.lexsort((owner, -intercepts, slopes))
    st: list[int] = []
    prev_slope = None
    for k in order:
        s = slopes[k]
        if prev_slope is not None and s == prev_slope:
            continue
        prev_slope = s
        while len(st) >= 2:
            a, b = st[-2], st[-1]
            x_ab = (intercepts[a] - intercepts[b]) / (slopes[b] - slopes[a])
            x_ak = (intercepts[a] - intercepts[k]) / (slopes[k] - slopes[a])
            if x_ak <= x_ab:
                st.pop()
            else:
                break
        st.append(k)
    segs = []
    left = -math.inf
    for i, k in enumerate(st):
        if i + 1 < len(st):
            k2 = st[i + 1]
            right = (intercepts[k] - intercepts[k2]) / (slopes[k2] - slopes[k])
        else:
            right = math.inf
        a, b = max(left, lo), min(right, hi)
        if b > a:
            segs.append((a, b, int(owner[k]), float(slopes[k]), float(intercepts[k])))
        left = right
    return segs


def _cells_1d(phi: PotentialPc, mu: SkeletonMeasure, face: str, want_hessian: bool) -> LaguerreDecomposition:
    t = phi.table
    lo, hi = (float(v[0]) for v in mu.skeleton.faces[face].polytope.bounding_box())
    slopes = t.G[:, 0]
    icpt = t.c - phi.psi[t.owner]
    segs = _envelope_1d(slopes, icpt, t.owner, lo, hi)
    pieces = _pieces_float(mu, face)
    N = len(phi.samples)
    masses = np.zeros(N)
    integral = 0.0
    for a, b, j, s, c in segs:
        for plo, phi_, v in pieces:
            u, w = max(a, plo[0]), min(b, phi_[0])
            if w > u:
                masses[j] += v * (w - u)
                integral += v * (s * (w * w - u * u) / 2 + c * (w - u))
    H = None
    if want_hessian:
        rows, cols, vals = [], [], []
        for s0, s1 in zip(segs, segs[1:]):
            i, j = s0[2], s1[2]
            if i == j:
                continue
            w = _density_1d(pieces, s0[1]) / abs(s1[3] - s0[3])
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-w, -w, w, w]
        H = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    return LaguerreDecomposition(masses, "exact-1d", integral, segments=segs, hessian=H)


def _segment_density(pieces, p0, p1) -> float:
    """Integral of the piecewise-constant density along the segment p0 -> p1."""
    d = p1 - p0
    length = float(np.hypot(*d))
    total = 0.0
    for lo, hi, v in pieces:
        t0, t1 = 0.0, 1.0
        ok = True
        for i in range(2):
            if d[i] == 0:
                if p0[i] < lo[i] or p0[i] > hi[i]:
                    ok = False
                    break
                continue
            a, b = (lo[i] - p0[i]) / d[i], (hi[i] - p0[i]) / d[i]
            t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
        if ok and t1 > t0:
            total += v * (t1 - t0) * length
    return total


def _cells_2d(phi: PotentialPc, mu: SkeletonMeasure, face: str, want_hessian: bool) -> LaguerreDecomposition:
    t = phi.table
    poly = mu.skeleton.faces[face].polytope
    base = [(float(x), float(y)) for x, y in poly.ordered_vertices_2d()]
    pieces = _pieces_float(mu, face)
    icpt = t.c - phi.psi[t.owner]
    K = len(icpt)
    N = len(phi.samples)
    # quick upper bound test: drop pieces that lose to another piece at every face vertex and centroid
    V = np.array(base + [tuple(np.mean(base, axis=0))])
    sc = V @ t.G.T + icpt[None, :]
    masses = np.zeros(N)
    integral = 0.0
    polys = []
    facets: dict[tuple, float] = {}
    order = np.argsort(-sc.max(axis=0), kind="stable")
    for k in range(K):
        ring = list(base)
        labels = [None] * len(ring)
        for k2 in order:
            if k2 == k:
                continue
            a = t.G[k2] - t.G[k]
            b = icpt[k] - icpt[k2]
            if a[0] == 0 and a[1] == 0:
                if b < 0 or (b == 0 and (t.owner[k2], k2) < (t.owner[k], k)):
                    ring = []
                    break
                continue
            ring, labels = clip_polygon(ring, a, b, labels, int(k2))
            if len(ring) < 3:
                ring = []
                break
        if not ring:
            continue
        area = abs(polygon_area(ring))
        if area <= 0:
            continue
        j = int(t.owner[k])
        polys.append((ring, j, k))
        for lo, hi, v in pieces:
            part = clip_box(ring, lo, hi)
            if len(part) < 3:
                continue
            a_ = abs(polygon_area(part))
            if a_ <= 0:
                continue
            cx, cy = polygon_centroid(part)
            masses[j] += v * a_
            integral += v * a_ * (t.G[k, 0] * cx + t.G[k, 1] * cy + icpt[k])
        if want_hessian:
            m = len(ring)
            for e in range(m):
                k2 = labels[e]
                if k2 is None or t.owner[k2] == j or k2 < k:
                    continue
                p0, p1 = np.array(ring[e]), np.array(ring[(e + 1) % m])
                dens = _segment_density(pieces, p0, p1)
                w = dens / float(np.linalg.norm(t.G[k] - t.G[k2]))
                key = (j, int(t.owner[k2]))
                facets[key] = facets.get(key, 0.0) + w
    H = None
    if want_hessian:
        rows, cols, vals = [], [], []
        for (i, j), w in sorted(facets.items()):
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-w, -w, w, w]
        H = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    return LaguerreDecomposition(masses, "exact-2d", integral, polygons=polys, hessian=H)


def _cells_grid(phi: PotentialPc, mu: SkeletonMeasure, h: float) -> LaguerreDecomposition:
    grid = skeleton_grid(mu, h)
    arg = phi.argmax(grid.points)
    masses = np.bincount(arg, weights=grid.weights, minlength=len(phi.samples))
    integral = float(np.dot(grid.weights, phi.evaluate(grid.points)))
    return LaguerreDecomposition(masses, "grid", integral, grid_argmax=arg, h=h)


def laguerre_cells(phi: PotentialPc, mu: SkeletonMeasure, method: str = "auto", h: float | None = None,
                   hessian: bool = False) -> LaguerreDecomposition:
    """Cells by argmax with lowest-index ties; exact for n <= 2, grid quadrature otherwise."""
    face = _face_of(mu, phi.cf)
    n = mu.skeleton.n
    if method == "auto":
        method = "exact" if n <= 2 else "grid"
    if method == "exact":
        if n == 1:
            return _cells_1d(phi, mu, face, hessian)
        if n == 2:
            return _cells_2d(phi, mu, face, hessian)
        raise ValueError("exact cells are available for n <= 2")
    return _cells_grid(phi, mu, h or 1.0 / 256)


def functional_F(phi: PotentialPc, mu: SkeletonMeasure, nu: BodyMeasure, cells: LaguerreDecomposition | None = None,
                 h: float | None = None) -> float:
    """``sum_j nu_j psi_j + int phi dmu``."""
    cells = cells if cells is not None else laguerre_cells(phi, mu, h=h)
    return float(np.dot(nu.weights, phi.psi)) + cells.integral_phi


# -- solver -------------------------------------------------------------------------------------


@dataclass
class TransportCertificate:
    residual_inf: float
    functional_value: float
    iterations: int
    method: str
    gauge: str = "min=0"
    history: list = field(default_factory=list)
    comparison: dict | None = None
    null_set: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "residual_inf": self.residual_inf,
            "functional_value": self.functional_value,
            "iterations": self.iterations,
            "method": self.method,
            "gauge": self.gauge,
        }
        if self.comparison is not None:
            out["comparison"] = self.comparison
        if self.null_set is not None:
            out["null_set"] = self.null_set
        return out


class _Marginal:
    """Convex ``Phi(x) = int_lo^x (a + w F(t)) dt`` with F the marginal CDF of mu along one axis."""

    def __init__(self, pieces, axis: int, lo: np.ndarray, hi: np.ndarray, a: float, w: float):
        bps = {lo[axis], hi[axis]}
        for plo, phi_, _ in pieces:
            bps.update((min(max(plo[axis], lo[axis]), hi[axis]), min(max(phi_[axis], lo[axis]), hi[axis])))
        t = np.array(sorted(bps))
        mass = np.zeros(len(t) - 1)
        for plo, phi_, v in pieces:
            other = np.prod([max(0.0, min(phi_[k], hi[k]) - max(plo[k], lo[k])) for k in range(len(lo)) if k != axis])
            for i in range(len(t) - 1):
                u, z = max(t[i], plo[axis]), min(t[i + 1], phi_[axis])
                if z > u:
                    mass[i] += v * other * (z - u)
        F = np.concatenate([[0.0], np.cumsum(mass)])
        F /= F[-1]
        self.t, self.F, self.a, self.w = t, F, a, w
        self.Phi = np.concatenate([[0.0], np.cumsum(np.diff(t) * (a + w * (F[:-1] + F[1:]) / 2))])

    def argmax(self, g: np.ndarray) -> np.ndarray:
        target = np.clip((g - self.a) / self.w, 0.0, 1.0)
        return np.interp(target, self.F, self.t)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        k = np.clip(np.searchsorted(self.t, x, side="right") - 1, 0, len(self.t) - 2)
        Fx = np.interp(x, self.t, self.F)
        d = x - self.t[k]
        return self.Phi[k] + self.a * d + self.w * (self.F[k] + Fx) / 2 * d


def _initial_psi(cf: CostField, samples: np.ndarray, mu: SkeletonMeasure) -> np.ndarray:
    """Dual weights of a convex start potential whose gradient pushes mu roughly onto the samples.

    On box faces the start is separable, ``sum_i Phi_i(x_i)`` with gradient an
    affine image of the marginal CDFs of mu, and its transform is exact. That
    gives every sample a nonempty cell for linear costs. Other faces use a
    quadratic transformed on a node grid.
    """
    face = cf.anchor.face
    poly = mu.skeleton.faces[face].polytope
    lo, hi = (np.array([float(v) for v in a]) for a in poly.bounding_box())
    blo, bhi = samples.min(axis=0), samples.max(axis=0)
    width = np.maximum(bhi - blo, 1e-3)
    if poly.is_box():
        t = PieceTable.build(cf, samples)
        pieces = _pieces_float(mu, face)
        xs = np.empty_like(t.G)
        vals = t.c.copy()
        for i in range(len(lo)):
            marg = _Marginal(pieces, i, lo, hi, blo[i] - 0.1 * width[i], 1.2 * width[i])
            xs[:, i] = marg.argmax(t.G[:, i])
            vals += t.G[:, i] * xs[:, i] - marg(xs[:, i])
        psi = np.full(len(samples), -np.inf)
        np.maximum.at(psi, t.owner, vals)
        return psi - psi.min()
    kappa = float(np.max((width * 1.2) / (hi - lo)))
    xc = (lo + hi) / 2
    b = (blo + bhi) / 2
    g = node_grid(mu.skeleton, 1.0 / 128 if len(lo) <= 2 else 1.0 / 16)
    X = g.points[g.face_index == mu.skeleton.top_faces.index(face)]
    phi0 = 0.5 * kappa * np.sum((X - xc) ** 2, axis=1) + X @ b
    psi = np.empty(len(samples))
    for s in range(0, len(samples), CHUNK):
        C = cf.evaluate(X, samples[s : s + CHUNK])
        psi[s : s + CHUNK] = np.max(C - phi0[:, None], axis=0)
    return psi - psi.min()


def solve_kantorovich(
    mu: SkeletonMeasure,
    nu: BodyMeasure,
    cf: CostField,
    tol: float = 1e-6,
    max_iter: int = 5000,
    method: str = "newton",
    h: float | None = None,
    psi0: np.ndarray | None = None,
) -> tuple[PotentialPc, TransportCertificate]:
    """Minimize the dual functional; stop when ``max_j |nu_j - mu(cell_j)| <= tol``.

    ``method="newton"`` is a damped Newton iteration with backtracking on the
    functional (exact cells, n <= 2); ``"gradient"`` is a fixed-metric descent
    usable with grid quadrature in any dimension. Every accepted step does not
    increase the functional. Raises NonConvergence with the best iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = mu.skeleton.n
    if method == "newton" and n > 2:
        method = "gradient"
    cell_method = "exact" if (n <= 2 and method == "newton") or (n <= 2 and h is None) else "grid"
    samples = np.atleast_2d(nu.samples)
    psi = _initial_psi(cf, samples, mu) if psi0 is None else np.asarray(psi0, dtype=float)
    table = PieceTable.build(cf, samples, _face_ring(mu.skeleton, cf.anchor.face))
    dups = table.duplicate_samples()
    if dups:
        i, j = dups[0]
        raise ValueError(
            f"samples {i} and {j} have identical costs ({len(dups)} such pairs); "
            "coarsen the body measure or raise l_max"
        )
    phi = PotentialPc(DualWeights.normalized(psi), cf, samples, table)
    nu_w = nu.weights

    def evaluate(p: PotentialPc, hess: bool):
        cells = laguerre_cells(p, mu, cell_method, h, hessian=hess)
        return cells, float(np.dot(nu_w, p.psi)) + cells.integral_phi

    cells, G = evaluate(phi, method == "newton")
    history = [G]
    best = (np.inf, phi, cells, G)
    step_scale = 1.0
    for it in range(max_iter + 1):
        grad = nu_w - cells.masses
        res = float(np.max(np.abs(grad)))
        if res < best[0]:
            best = (res, phi, cells, G)
        if res <= tol:
            cert = TransportCertificate(res, G, it, f"{method}/{cells.method}", history=history)
            return phi, cert
        if it == max_iter:
            break
        if method == "newton":
            H = cells.hessian.tolil()
            diag = H.diagonal()
            scale = float(diag.max()) if diag.size and diag.max() > 0 else 1.0
            for j in np.flatnonzero(diag <= 0):
                H[j, j] = scale
            H = H.tocsr() + sp.identity(len(grad), format="csr") * (1e-12 * scale)
            direction = -spla.spsolve(H.tocsc(), grad)
        else:
            direction = -grad * step_scale
        slope = float(np.dot(grad, direction))
        if slope >= 0:
            direction = -grad
            slope = -float(np.dot(grad, grad))
        t = 1.0
        accepted = False
        while t > 1e-12:
            trial = phi.with_psi(phi.psi + t * direction)
            try:
                tcells, tG = evaluate(trial, method == "newton")
                if np.any((tcells.masses <= 0) & (nu_w > 0)) and not np.any((cells.masses <= 0) & (nu_w > 0)):
                    raise DegenerateCell()
            except DegenerateCell:
                t *= 0.5
                continue
            if tG <= G + 1e-4 * t * slope + 1e-15 * max(1.0, abs(G)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        if method == "gradient":
            step_scale = min(step_scale * (2.0 if t == 1.0 else 1.0), 1e6) * (t if t < 1 else 1.0)
        assert tG <= G + 1e-12 * max(1.0, abs(G)), "dual functional increased on an accepted step"
        phi, cells, G = trial, tcells, tG
        history.append(G)
    res, phi_b, cells_b, G_b = best
    cert = TransportCertificate(res, G_b, len(history) - 1, f"{method}/{cells_b.method}", history=history)
    raise NonConvergence(f"residual {res:.3g} > tol {tol:g} after {len(history) - 1} steps", phi_b, cert)


# -- conjugate sets and the global identity ---------------------------------------------------------


@dataclass(frozen=True)
class Box:
    face: str
    lo: tuple
    hi: tuple


def _box_mu(mu: SkeletonMeasure, E: Sequence[Box]) -> float:
    return sum(mu.box_mass(b.face, b.lo, b.hi) for b in E)


def _cell_hits(cells: LaguerreDecomposition, E: Sequence[Box], mu: SkeletonMeasure, phi: PotentialPc) -> dict[int, float]:
    """mu-mass of each cell inside E, for cells meeting E with positive measure."""
    hits: dict[int, float] = {}
    if cells.method == "exact-1d":
        pieces = _pieces_float(mu, phi.cf.anchor.face)
        for b in E:
            for a_, b_, j, _, _ in cells.segments:
                u, w = max(a_, b.lo[0]), min(b_, b.hi[0])
                if w > u:
                    m = sum(v * max(0.0, min(w, hi[0]) - max(u, lo[0])) for lo, hi, v in pieces)
                    hits[j] = hits.get(j, 0.0) + m
    elif cells.method == "exact-2d":
        pieces = _pieces_float(mu, phi.cf.anchor.face)
        for b in E:
            for ring, j, _ in cells.polygons:
                part = clip_box(ring, b.lo, b.hi)
                if len(part) >= 3 and abs(polygon_area(part)) > 0:
                    m = 0.0
                    for lo, hi, v in pieces:
                        q = clip_box(part, np.maximum(lo, b.lo), np.minimum(hi, b.hi))
                        if len(q) >= 3:
                            m += v * abs(polygon_area(q))
                    hits[j] = hits.get(j, 0.0) + m
    else:
        grid = skeleton_grid(mu, cells.h)
        for b in E:
            inside = np.all((grid.points >= np.array(b.lo)) & (grid.points <= np.array(b.hi)), axis=1)
            for j, w in zip(cells.grid_argmax[inside], grid.weights[inside]):
                hits[int(j)] = hits.get(int(j), 0.0) + float(w)
    return hits


def conjugate_set_forward(E: Sequence[Box], phi: PotentialPc, mu: SkeletonMeasure,
                          cells: LaguerreDecomposition | None = None) -> list[int]:
    """Indices of samples whose cell meets the union of boxes E with positive length/area."""
    cells = cells if cells is not None else laguerre_cells(phi, mu)
    return sorted(_cell_hits(cells, E, mu, phi))


@dataclass(frozen=True)
class GlobalMAReport:
    max_box_discrepancy: float
    max_box_excess: float  # discrepancy minus the collar allowance, positive means violation
    max_subset_discrepancy: float
    trials: int
    method: str


def random_boxes(mu: SkeletonMeasure, face: str, trials: int, seed: int) -> list[list[Box]]:
    rng = np.random.default_rng(seed)
    lo, hi = (np.array([float(v) for v in a]) for a in mu.skeleton.faces[face].polytope.bounding_box())
    out = []
    for _ in range(trials):
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        out.append([Box(face, tuple(np.minimum(a, b)), tuple(np.maximum(a, b)))])
    return out


def global_ma_box(E: Sequence[Box], phi: PotentialPc, mu: SkeletonMeasure, nu: BodyMeasure,
                  cells: LaguerreDecomposition) -> tuple[float, float, float]:
    """(nu(grad phi(E)), mu(E), collar) for one region; collar = mu(touched cells minus E)."""
    hits = _cell_hits(cells, E, mu, phi)
    idx = sorted(hits)
    lhs = float(np.sum(nu.weights[idx])) if idx else 0.0
    rhs = _box_mu(mu, E)
    collar = float(np.sum(cells.masses[idx])) - float(sum(hits.values())) if idx else 0.0
    return lhs, rhs, max(collar, 0.0)


def verify_global_ma(phi: PotentialPc, mu: SkeletonMeasure, nu: BodyMeasure, trials: int = 100, seed: int = 0,
                     cells: LaguerreDecomposition | None = None, tol: float = 0.0) -> GlobalMAReport:
    """Check nu(grad phi(E)) = mu(E) on random boxes and mu(grad phi(F)) = nu(F) on random subsets.

    For a semi-discrete target the cells touched by E extend beyond E; the
    allowance for each box is ``tol`` plus that collar mass.
    """
    cells = cells if cells is not None else laguerre_cells(phi, mu)
    face = phi.cf.anchor.face
    worst = excess = 0.0
    for E in random_boxes(mu, face, trials, seed):
        lhs, rhs, collar = global_ma_box(E, phi, mu, nu, cells)
        worst = max(worst, abs(lhs - rhs))
        excess = max(excess, abs(lhs - rhs) - collar - tol)
    rng = np.random.default_rng(seed + 1)
    sub = 0.0
    N = len(nu.weights)
    for _ in range(trials):
        F = rng.random(N) < 0.5
        sub = max(sub, abs(float(np.sum(cells.masses[F])) - float(np.sum(nu.weights[F]))))
    return GlobalMAReport(worst, excess, sub, trials, cells.method)


# -- pointwise certificates ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonEntry:
    x: tuple
    gradient: tuple
    flag: str  # "ok", "wall", "multi", "not-interior", "shrunk", "not-affine"
    domain: AffineDomain | None = None

    @property
    def passed(self) -> bool:
        return self.flag == "ok"


@dataclass(frozen=True)
class ComparisonReport:
    entries: tuple
    tested: int
    passed: int
    collar_mass: float
    l_max: int

    @property
    def pass_fraction(self) -> float:
        return self.passed / self.tested if self.tested else 1.0

    def as_dict(self) -> dict:
        return {"tested": self.tested, "passed": self.passed, "collar_mass": self.collar_mass, "l_max": self.l_max}


def _check_point(phi: PotentialPc, family: BasisFamily, x: np.ndarray, l_max: int, k_radius: float) -> ComparisonEntry:
    cf = phi.cf
    face = cf.anchor.face
    xq = SkeletonPoint(face, tuple(rq.to_fraction(float(v)) for v in x))
    xt = tuple(float(v) for v in x)
    if not is_sufficiently_irrational(xq, family, l_max, family.skeleton):
        return ComparisonEntry(xt, (), "wall")
    grad, multi, j = phi.active_gradients(x)
    gt = tuple(float(v) for v in grad)
    if multi:
        return ComparisonEntry(xt, gt, "multi")
    anchor_x = Anchor(xq, l_max)
    body_x = okounkov_body(gradient_semigroup(family, anchor_x, l_max))
    gq = tuple(rq.to_fraction(v) for v in gt)
    if not body_x.contains(gq, strict=True):
        return ComparisonEntry(xt, gt, "not-interior")
    # K must meet the degree-l_max lattice on every side of the gradient, else no section constrains U
    r = min(max(k_radius, 1.0 / l_max), 0.5 * body_x.distance_to_boundary(gt))
    rq_ = rq.to_fraction(r).limit_denominator(10**6)
    K = convex_hull([tuple(g + s * rq_ for g, s in zip(gq, signs)) for signs in _corners(len(gq))])
    cf_x = CostField(anchor_x, "fekete", body_x, family=family, l_max=l_max)
    try:
        U = affine_domain(cf_x, K, l_max, family)
    except (ShrunkToPoint, PNotInBody):
        return ComparisonEntry(xt, gt, "shrunk")
    # the active cost minus its value at x is affine with slope grad phi(x) on U
    verts = np.array([[float(c) for c in v] for v in U.vertices])
    zs = x[None, :] + 0.9 * (verts - x[None, :])
    pj = phi.samples[j][None, :]
    vals = cf.evaluate(zs, pj)[:, 0] - cf.evaluate(x[None, :], pj)[0, 0]
    if np.max(np.abs(vals - (zs - x[None, :]) @ grad)) > 1e-9:
        return ComparisonEntry(xt, gt, "not-affine", U)
    return ComparisonEntry(xt, gt, "ok", U)


def _corners(n: int):
    import itertools

    return itertools.product((-1, 1), repeat=n)


def comparison_certificate(phi: PotentialPc, family: BasisFamily, points: np.ndarray, mu: SkeletonMeasure | None = None,
                           l_max: int = 12, k_radius: float = 0.02, collar_h: float | None = None,
                           workers: int | None = None) -> ComparisonReport:
    """Pointwise weak-comparison test at sampled skeleton points.

    A point passes when it is off every wall of degree <= l_max, the potential
    has a single gradient there, that gradient is interior to the body at the
    point, and an affine domain around the point exists on which the active
    cost is affine. ``collar_mass`` is the mu-mass of grid cells whose centers
    fail the same test; it estimates the measure of the region the sampled
    failures come from.
    """
    from .parallel import ordered_map

    points = np.atleast_2d(np.asarray(points, dtype=float))
    entries = ordered_map(lambda x: _check_point(phi, family, x, l_max, k_radius), list(points), workers)
    tested = [e for e in entries if e.flag != "wall"]
    passed = sum(e.passed for e in tested)
    collar = 0.0
    if mu is not None:
        h = collar_h or 1.0 / (8 * l_max)
        grid = skeleton_grid(mu, h)
        res = ordered_map(lambda x: _check_point(phi, family, x, l_max, k_radius), list(grid.points), workers)
        collar = float(sum(w for e, w in zip(res, grid.weights) if not e.passed))
    return ComparisonReport(tuple(entries), len(tested), passed, collar, l_max)


# -- further probes -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class RealMAReport:
    max_discrepancy: float
    intervals: int


def real_ma_check_1d(phi: PotentialPc, mu: SkeletonMeasure, Ln=1, levels: int = 6,
                     cells: LaguerreDecomposition | None = None) -> RealMAReport:
    """Alexandrov measure |d phi(I)| = phi'_+(b) - phi'_-(a) against (L) mu(I) on dyadic intervals."""
    if mu.skeleton.n != 1:
        raise DimensionNot1("the real Monge-Ampere check is one-dimensional")
    cells = cells if cells is not None else laguerre_cells(phi, mu)
    segs = cells.segments
    face = phi.cf.anchor.face
    lo, hi = (float(v[0]) for v in mu.skeleton.faces[face].polytope.bounding_box())
    starts = np.array([s[0] for s in segs])
    slopes = np.array([s[3] for s in segs])

    def right_slope(x):
        k = int(np.searchsorted(starts, x, side="right")) - 1
        return slopes[max(k, 0)]

    def left_slope(x):
        k = int(np.searchsorted(starts, x, side="left")) - 1
        return slopes[max(k, 0)]

    worst = 0.0
    count = 0
    for m in range(1, levels + 1):
        for k in range(2**m):
            a = lo + (hi - lo) * k / 2**m
            b = lo + (hi - lo) * (k + 1) / 2**m
            # closed interval [a, b]; at the face ends the one-sided slope inside the face is used
            dphi = (right_slope(b) if b < hi else left_slope(b)) - (left_slope(a) if a > lo else right_slope(a))
            target = float(Ln) * mu.box_mass(face, (a,), (b,))
            worst = max(worst, abs(dphi - target))
            count += 1
    return RealMAReport(worst, count)


def domination_probe(phi: np.ndarray, phi2: np.ndarray, positive: np.ndarray, tol: float = 1e-9) -> tuple[bool, bool]:
    """(premise, conclusion): phi <= phi2 on mu-positive nodes, and then on all nodes."""
    premise = bool(np.all(phi[positive] <= phi2[positive] + tol))
    conclusion = bool(np.all(phi <= phi2 + tol))
    return premise, conclusion


def null_set_statistics(phi: PotentialPc, mu: SkeletonMeasure, hs: Sequence[float]) -> list[tuple[float, float]]:
    """mu-mass of grid cells whose center is within one Lipschitz-scaled cell of two samples.

    A node counts as conjugate to two samples when the runner-up sample's value
    is within ``L h`` of the maximum, with L the largest piece gradient norm.
    """
    L = float(np.max(np.linalg.norm(phi.table.G, axis=1))) if len(phi.table.G) else 0.0
    out = []
    for h in hs:
        grid = skeleton_grid(mu, h)
        mass = 0.0
        for s in range(0, len(grid.points), CHUNK):
            X = grid.points[s : s + CHUNK]
            C = phi.cf.evaluate(X, phi.samples) - phi.psi[None, :]
            part = np.sort(C, axis=1)
            close = part[:, -1] - part[:, -2] <= L * h if C.shape[1] > 1 else np.zeros(len(X), bool)
            mass += float(np.sum(grid.weights[s : s + CHUNK][close]))
        out.append((h, mass))
    return out
