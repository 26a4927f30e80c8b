"""Built-in degeneration models with closed forms, and a seeded random basis generator."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import rational as rq
from .cost import LinearCost, ProductCost, TateCost
from .errors import GenerationFailed, MalformedInput
from .polytope import Polytope, convex_hull
from .skeleton import Skeleton, SkeletonMeasure, SkeletonPoint, build_skeleton, unit_cube
from .tropical import BasisFamily, DegreeBasis, MonomialTerm, check_valuative_independence, make_section, prune_terms

# Anchor coordinates with the prime denominator 100003: no wall of degree
# below ~50000 in any built-in model passes through them.
ANCHOR_DEN = 100003
DEFAULT_ANCHORS = (41421, 73205, 23607, 64575)
TATE_ANCHOR = 13701


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: Mapping = field(default_factory=dict)
    l_max: int = 12


@dataclass
class Model:
    spec: ModelSpec
    skeleton: Skeleton
    family: BasisFamily
    Ln: Fraction
    closed_form: object | None
    default_anchor: SkeletonPoint
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.skeleton.n

    def body(self, y: SkeletonPoint | None = None) -> Polytope | None:
        if self.closed_form is None:
            return None
        y = y or self.default_anchor
        return self.closed_form.body(y.as_float())

    def N(self, l: int) -> int:
        return len(self.family.basis(l).sections)


def _default_anchor(n: int, face: str = "F") -> SkeletonPoint:
    return SkeletonPoint(face, tuple(Fraction(DEFAULT_ANCHORS[i % 4], ANCHOR_DEN) for i in range(n)))


# -- monomial ------------------------------------------------------------------------


def monomial_gradients(n: int, l: int, shape: str) -> list[tuple]:
    pts = itertools.product(range(l + 1), repeat=n)
    if shape == "simplex":
        return [p for p in pts if sum(p) <= l]
    return list(pts)


def monomial(n: int = 1, Ln=None, l_max: int = 12) -> Model:
    """Unit cube skeleton with single-monomial sections z^alpha.

    ``Ln = n!`` gives the cube lattice {0..l}^n, ``Ln = 1`` the simplex
    {alpha >= 0, |alpha| <= l}; for n = 1 both coincide.
    """
    fact = math.factorial(n)
    Ln = Fraction(fact if Ln is None else rq.to_fraction(Ln))
    if Ln == fact:
        shape = "cube"
    elif Ln == 1:
        shape = "simplex"
    else:
        raise MalformedInput(f"monomial model supports Ln = n! (cube) or 1 (simplex), got {Ln}")
    s = unit_cube(n)

    def build(l):
        secs = tuple(
            make_section(l, {"F": [MonomialTerm(g, Fraction(0))]}, "_".join(map(str, g)))
            for g in monomial_gradients(n, l, shape)
        )
        return DegreeBasis(l, secs, validated=True)

    body_pts = [p for p in itertools.product((0, 1), repeat=n) if shape == "cube" or sum(p) <= 1]
    closed = LinearCost(convex_hull(body_pts))
    fam = BasisFamily(s, build, l_max, Ln, f"monomial(n={n},Ln={Ln})")
    spec = ModelSpec("monomial", {"n": n, "Ln": str(Ln)}, l_max)
    return Model(spec, s, fam, Ln, closed, _default_anchor(n))


# -- Tate circle ------------------------------------------------------------------------


def tate_skeleton(d: int = 1) -> Skeleton:
    return build_skeleton(
        {
            "n": 1,
            "faces": [
                {"id": "F", "vertices": [["0"], ["1"]]},
                {"id": "v0", "vertices": [["0"]]},
                {"id": "v1", "vertices": [["1"]]},
            ],
            "gluings": [
                {"from": "v1", "to": "v0", "linear": [[1]], "translate": ["-1"], "twist": {"p": [0], "a": str(Fraction(d, 2))}}
            ],
        }
    )


def _tate_window(l: int, d: int, j: int, scale: int = 1) -> list[MonomialTerm]:
    dl = d * l
    lo, hi = -(1 + scale) * dl - 1, scale * dl + 1
    start = lo + ((j - lo) % dl)
    return [MonomialTerm((-m,), Fraction(m * m, 2 * dl)) for m in range(start, hi + 1, dl)]


def tate_terms(l: int, d: int, j: int, poly: Polytope) -> tuple:
    """Envelope terms of the residue-j theta section of degree l on [0, 1].

    The window of integers m is finite; the result is certified by checking
    that doubling the window leaves the pruned envelope unchanged.
    """
    terms = prune_terms(_tate_window(l, d, j), poly)
    wider = prune_terms(_tate_window(l, d, j, scale=2), poly)
    if terms != wider:
        raise RuntimeError(f"Tate window for degree {l}, class {j} is not certified")
    return terms


def tate_circle(q="1/2", l_max: int = 12) -> Model:
    """Circle R/Z with theta sections log|theta_j| = max_{m = j mod dl} (-m x - m^2/(2 d l)).

    Only quadratic coefficients q = 1/(2d) with d a positive integer give
    sections that are compatible with the gluing x -> x - 1 (with twist d/2).
    """
    q = rq.to_fraction(q)
    if q <= 0 or q.numerator != 1 or q.denominator % 2:
        raise MalformedInput(f"tate_circle needs q = 1/(2d) for a positive integer d, got {q}")
    d = q.denominator // 2
    s = tate_skeleton(d)
    poly = s.faces["F"].polytope

    def build(l):
        secs = tuple(
            make_section(l, {"F": tate_terms(l, d, j, poly)}, str(j)) for j in range(d * l)
        )
        return DegreeBasis(l, secs, validated=True)

    fam = BasisFamily(s, build, l_max, Fraction(d), f"tate_circle(q={q})")
    spec = ModelSpec("tate_circle", {"q": str(q)}, l_max)
    return Model(spec, s, fam, Fraction(d), TateCost(d), SkeletonPoint("F", (Fraction(TATE_ANCHOR, ANCHOR_DEN),)))


def tate_window_oracle(l: int, d: int, j: int, x: Fraction, M: int | None = None) -> Fraction:
    """Brute-force envelope value over |m| <= M (default 4 d l + 4).

    For x in [0, 1], the quadratic m^2/(2dl) + m x exceeds its minimum over the
    class once |m| > 3 d l, so the default window contains every maximizer.
    """
    dl = d * l
    M = 4 * dl + 4 if M is None else M
    return max(-m * x - Fraction(m * m, 2 * dl) for m in range(-M, M + 1) if (m - j) % dl == 0)


# -- torus products --------------------------------------------------------------------------


def _factor_info(f: Model):
    if f.spec.kind == "tate_circle":
        d = f.family.Ln.numerator
        return d, ("tate", d)
    if f.spec.kind == "monomial" and f.n == 1:
        return 1, ("monomial", 1)
    raise MalformedInput("torus_product factors must be one-dimensional monomial or tate_circle models")


def torus_product(factors: Sequence[Model], l_max: int = 8) -> Model:
    """Product of one-dimensional models on the unit cube, opposite faces glued for Tate factors."""
    n = len(factors)
    if n < 2:
        raise MalformedInput("torus_product needs at least two factors")
    infos = [_factor_info(f) for f in factors]
    verts = [[str((i >> k) & 1) for k in range(n)] for i in range(2**n)]
    faces = [{"id": "F", "vertices": verts}]
    gluings = []
    for k, (d, (kind, _)) in enumerate(infos):
        if kind != "tate":
            continue
        lo = [v for v in verts if v[k] == "0"]
        hi = [v for v in verts if v[k] == "1"]
        faces.append({"id": f"e{k}0", "vertices": lo})
        faces.append({"id": f"e{k}1", "vertices": hi})
        translate = ["0"] * n
        translate[k] = "-1"
        twist_p = [0] * n
        gluings.append(
            {
                "from": f"e{k}1",
                "to": f"e{k}0",
                "linear": [[int(i == j) for j in range(n)] for i in range(n)],
                "translate": translate,
                "twist": {"p": twist_p, "a": str(Fraction(d, 2))},
            }
        )
    s = build_skeleton({"n": n, "faces": faces, "gluings": gluings})
    poly = s.faces["F"].polytope

    def build(l):
        per_factor = []
        for f in factors:
            b = f.family.basis(l)
            per_factor.append([(sec.label, sec.face_terms("F")) for sec in b.sections])
        secs = []
        for combo in itertools.product(*per_factor):
            label = ",".join(lab for lab, _ in combo)
            terms = [
                MonomialTerm(tuple(c for t in ts for c in t.gradient), sum((t.shift for t in ts), Fraction(0)))
                for ts in itertools.product(*[tl for _, tl in combo])
            ]
            secs.append(make_section(l, {"F": prune_terms(terms, poly)}, label))
        return DegreeBasis(l, tuple(secs), validated=True)

    Ln = Fraction(math.factorial(n)) * math.prod(d for d, _ in infos)
    closed = ProductCost([f.closed_form for f in factors])
    anchor = SkeletonPoint("F", tuple(c for f in factors for c in f.default_anchor.coords))
    fam = BasisFamily(s, build, l_max, Ln, "torus_product")
    spec = ModelSpec("torus_product", {"factors": [f.spec for f in factors]}, l_max)
    return Model(spec, s, fam, Ln, closed, anchor)


# -- random generator -------------------------------------------------------------------------


def _random_polytope(n: int, rng: np.random.Generator) -> Polytope:
    if n == 1:
        return convex_hull([(0,), (int(rng.integers(1, 3)),)])
    if n == 2:
        while True:
            pts = [tuple(int(v) for v in rng.integers(0, 3, size=2)) for _ in range(int(rng.integers(3, 6)))]
            if rq.affine_rank([rq.to_vector(p) for p in pts]) == 2:
                return convex_hull(pts)
    raise MalformedInput("random models support n in {1, 2}")


def _lattice_points(P: Polytope, l: int) -> list[tuple]:
    lo, hi = P.bounding_box()
    ranges = [range(int(l * a), int(l * b) + 1) for a, b in zip(lo, hi)]
    return [g for g in itertools.product(*ranges) if P.contains(tuple(Fraction(c, l) for c in g))]


def _small_rational(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 5)))


_DIRECTIONS = {1: [(1,)], 2: [(1, 0), (0, 1), (1, 1), (1, -1)]}


def _random_degree(n: int, l: int, P: Polytope, s: Skeleton, seed: int, budget: int) -> DegreeBasis:
    rng = np.random.default_rng([seed, l])
    grads = _lattice_points(P, l)
    gset = set(grads)
    terms = {g: [MonomialTerm(g, _small_rational(rng))] for g in grads}
    spent = 0
    # chains g, g+e, ..., g+ke leaving the lattice set: section i takes the
    # term of gradient g+(i+1)e beyond a wall e.x = w_i, with w_i decreasing
    n_chains = int(rng.integers(0, 3)) if budget > 0 else 0
    used: set = set()
    exits: set = set()
    for _ in range(n_chains):
        e = _DIRECTIONS[n][int(rng.integers(len(_DIRECTIONS[n])))]
        start = grads[int(rng.integers(len(grads)))]
        while tuple(a - b for a, b in zip(start, e)) in gset:
            start = tuple(a - b for a, b in zip(start, e))
        chain = [start]
        while tuple(a + b for a, b in zip(chain[-1], e)) in gset:
            chain.append(tuple(a + b for a, b in zip(chain[-1], e)))
        exit_g = tuple(a + b for a, b in zip(chain[-1], e))
        if used & set(chain) or exit_g in exits or spent + len(chain) > budget:
            continue
        used |= set(chain)
        exits.add(exit_g)
        spent += len(chain)
        ex = [sum(c * v for c, v in zip(e, corner)) for corner in itertools.product((0, 1), repeat=n)]
        lo, hi = min(ex), max(ex)
        walls = sorted((Fraction(int(rng.integers(1, 16)), 16) * (hi - lo) + lo for _ in chain), reverse=True)
        for g, w in zip(chain, walls):
            nxt = tuple(a + b for a, b in zip(g, e))
            base = terms[g][0]
            terms[g].append(MonomialTerm(nxt, base.shift + w))
    secs = [make_section(l, {"F": ts}, "_".join(map(str, g)), s) for g, ts in terms.items()]
    basis = DegreeBasis(l, tuple(secs))
    verdict = check_valuative_independence(basis, s)
    # occasional extra random terms, kept only when the basis stays valid
    extra_tries = min(2, budget - spent) if budget > spent else 0
    C = 2 * l
    for _ in range(extra_tries):
        if not verdict.valid:
            break
        k = int(rng.integers(len(secs)))
        g = tuple(int(v) for v in rng.integers(-C, C + 1, size=n))
        cand = list(secs)
        old = cand[k]
        cand[k] = make_section(l, {"F": list(old.face_terms("F")) + [MonomialTerm(g, _small_rational(rng) + 2)]}, old.label, s)
        v2 = check_valuative_independence(DegreeBasis(l, tuple(cand)), s)
        spent += 1
        if v2.valid:
            secs, verdict = cand, v2
    if not verdict.valid:
        raise GenerationFailed(f"random basis (seed={seed}, degree={l}) failed validation within budget {budget}")
    return verdict.basis


def random_model(n: int = 1, l_max: int = 6, seed: int = 0, term_budget: int = 10_000) -> Model:
    """Seeded random valuative-independent family on the unit cube.

    Each degree carries one section per lattice point of l P for a random
    lattice polytope P. With a positive ``term_budget`` some sections receive
    additional terms (gradient chains and random extras); every degree is
    validated before it is returned. ``term_budget = 0`` gives single-term
    sections only.
    """
    if n not in (1, 2):
        raise MalformedInput("random models support n in {1, 2}")
    rng = np.random.default_rng(seed)
    P = _random_polytope(n, rng)
    s = unit_cube(n)
    Ln = Fraction(math.factorial(n)) * P.volume
    fam = BasisFamily(s, lambda l: _random_degree(n, l, P, s, seed, term_budget), l_max, Ln, f"random(seed={seed})")
    spec = ModelSpec("random", {"n": n, "seed": seed, "term_budget": term_budget}, l_max)
    closed = LinearCost(P) if term_budget == 0 else None
    return Model(spec, s, fam, Ln, closed, _default_anchor(n), seed)


# -- spec parsing -----------------------------------------------------------------------------


def _parse_inline(text: str) -> dict:
    """``kind:key=val,key=val`` with list values separated by ';'."""
    kind, _, rest = text.partition(":")
    out: dict = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise MalformedInput(f"expected key=value, got {item!r}", text)
        out[key.strip()] = val.split(";") if ";" in val else val.strip()
    return out


def instantiate(ms, l_max: int | None = None, seed: int | None = None) -> Model:
    """Build a model from a ModelSpec, a dict, or an inline ``kind:key=val`` string."""
    if isinstance(ms, str):
        ms = _parse_inline(ms)
    if isinstance(ms, ModelSpec):
        d = {"kind": ms.kind, **dict(ms.params), "l_max": ms.l_max}
    else:
        d = dict(ms)
    kind = d.pop("kind", None)
    lm = int(l_max if l_max is not None else d.pop("l_max", 12))
    d.pop("l_max", None)
    try:
        if kind == "monomial":
            return monomial(int(d.get("n", 1)), d.get("Ln"), lm)
        if kind in ("tate_circle", "tate"):
            return tate_circle(d.get("q", "1/2"), lm)
        if kind == "torus_product":
            facs = d.get("factors", ["tate_circle", "tate_circle"])
            if isinstance(facs, str):
                facs = [facs]
            models = [instantiate(f if not isinstance(f, str) else {"kind": f.split("@")[0], **_factor_args(f)}, lm) for f in facs]
            return torus_product(models, lm)
        if kind == "random":
            sd = int(d.get("seed", 0 if seed is None else seed))
            return random_model(int(d.get("n", 1)), lm, sd, int(d.get("term_budget", d.get("budget", 10_000))))
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad model parameters: {exc}", str(kind)) from exc
    raise MalformedInput(f"unknown model kind {kind!r}", "kind")


def _factor_args(f: str) -> dict:
    # factor shorthand "tate_circle@q=1/4"
    _, _, arg = f.partition("@")
    if not arg:
        return {}
    k, _, v = arg.partition("=")
    return {k: v}


# -- one-dimensional transport oracle ------------------------------------------------------------


@dataclass(frozen=True)
class Oracle1D:
    order: tuple
    boundaries: tuple
    value: Fraction


def _cdf_inverse(pieces: Sequence, mass: Fraction) -> Fraction:
    acc = Fraction(0)
    for lo, hi, v in pieces:
        m = v * (hi - lo)
        if acc + m >= mass and v > 0:
            return lo + (mass - acc) / v
        acc += m
    return pieces[-1][1]


def oracle_1d_transport(mu: SkeletonMeasure, atoms: Sequence, weights: Sequence, y=0) -> Oracle1D:
    """Monotone rearrangement for the cost p (x - y) on a one-face interval skeleton.

    Atoms are sorted by p; the cell of the k-th atom is the interval between
    consecutive quantiles of mu. Returns the boundaries and the optimal value
    ``sum_j int_{cell_j} p_j (x - y) dmu`` in exact arithmetic.
    """
    s = mu.skeleton
    if s.n != 1 or len(s.top_faces) != 1:
        raise ValueError("the 1-D oracle needs a single interval face")
    fid = s.top_faces[0]
    lo, hi = s.faces[fid].polytope.bounding_box()
    pieces = sorted((max(p.lo[0], lo[0]), min(p.hi[0], hi[0]), p.value) for p in mu.pieces[fid])
    pieces = [pc for pc in pieces if pc[1] > pc[0]]
    ps = [rq.to_fraction(a) for a in atoms]
    ws = [rq.to_fraction(w) for w in weights]
    order = sorted(range(len(ps)), key=lambda j: (ps[j], j))
    y = rq.to_fraction(y)
    bounds = []
    acc = Fraction(0)
    for j in order[:-1]:
        acc += ws[j]
        bounds.append(_cdf_inverse(pieces, acc))
    edges = [lo[0]] + bounds + [hi[0]]
    value = Fraction(0)
    for k, j in enumerate(order):
        a, b = edges[k], edges[k + 1]
        for plo, phi, v in pieces:
            u, w = max(a, plo), min(b, phi)
            if w > u:
                value += ps[j] * v * ((w * w - u * u) / 2 - y * (w - u))
    return Oracle1D(tuple(order), tuple(bounds), value)
