import threading
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skelot.errors import DegreeMismatch, FaceMismatch, MalformedInput
from skelot.models import monomial, tate_circle
from skelot.parallel import ordered_map
from skelot.polytope import convex_hull
from skelot.skeleton import SkeletonPoint, unit_cube
from skelot.tropical import (
    BasisFamily,
    DegreeBasis,
    basis_from_dict,
    basis_to_dict,
    check_continuity,
    check_valuative_independence,
    is_sufficiently_irrational,
    lipschitz_constant,
    make_section,
    multiply_sections,
    wall_complex,
)

SQ = unit_cube(1)
terms1 = st.lists(st.tuples(st.integers(-4, 4), st.fractions(-3, 3, max_denominator=6)), min_size=1, max_size=6)
xs = st.fractions(0, 1, max_denominator=50)


def sec(degree, pairs, label=""):
    return make_section(degree, {"F": [((p,), a) for p, a in pairs]}, label, SQ)


def test_duplicate_gradients_keep_smallest_shift():
    s = make_section(1, {"F": [((1,), 2), ((1,), 1)]})
    assert [t.shift for t in s.terms["F"]] == [1]


def test_dominated_term_is_pruned_on_the_face():
    # x - 5 never reaches 0 on [0, 1]
    s = sec(1, [(0, 0), (1, 5)])
    assert [t.gradient for t in s.terms["F"]] == [(0,)]


def test_tie_on_a_point_is_kept():
    # 0 and x - 1 meet only at x = 1
    s = sec(1, [(0, 0), (1, 1)])
    assert len(s.terms["F"]) == 2


@given(terms1, xs)
def test_exact_and_float_values_agree(pairs, x):
    s = sec(1, pairs)
    exact = s.value("F", (x,))
    assert exact == max(p * x - a for p, a in pairs)
    assert float(exact) == pytest.approx(s.evaluate("F", np.array([[float(x)]]))[0], abs=1e-12)


@given(terms1, terms1, xs)
def test_product_adds_values(p1, p2, x):
    s1, s2 = sec(1, p1), sec(2, p2)
    prod = multiply_sections(s1, s2, SQ)
    assert prod.degree == 3
    assert prod.value("F", (x,)) == s1.value("F", (x,)) + s2.value("F", (x,))


def test_product_needs_same_faces():
    a = make_section(1, {"F": [((0,), 0)]})
    b = make_section(1, {"G": [((0,), 0)]})
    with pytest.raises(FaceMismatch):
        multiply_sections(a, b)


def test_tate_sections_respect_the_gluing():
    m = tate_circle(l_max=6)
    for l in (1, 3, 6):
        for s in m.family.basis(l).sections:
            assert check_continuity(s, m.skeleton) == []


def test_monomial_basis_is_valid():
    b = monomial(2, l_max=3).family.basis(3)
    v = check_valuative_independence(b, unit_cube(2))
    assert v.valid and v.basis.validated


def test_duplicated_section_gives_witness():
    s = sec(2, [(1, 0)], "a")
    t = sec(2, [(1, 0)], "b")
    v = check_valuative_independence(DegreeBasis(2, (s, t)), SQ)
    assert not v.valid
    assert v.pair == ("a", "b") and v.gradient == (1,)
    assert v.chamber is not None


def test_collision_only_on_one_chamber():
    # max(0, x - 1/2) leads with gradient 1 on (1/2, 1], the same as x
    s = sec(1, [(0, 0), (1, Fraction(1, 2))], "kink")
    t = sec(1, [(1, 0)], "lin")
    b = DegreeBasis(1, (s, t))
    wc = wall_complex(b, SQ)
    assert len(wc.chambers) == 2
    v = check_valuative_independence(b, SQ, wc)
    assert not v.valid
    assert v.gradient == (1,)
    assert v.chamber.contains((Fraction(3, 4),))


def test_chambers_tile_the_face():
    m = tate_circle(l_max=4)
    wc = wall_complex(m.family.basis(4), m.skeleton)
    assert sum(convex_hull(c.vertices).volume for c in wc.chambers) == 1


def test_irrationality():
    m = tate_circle(l_max=12)
    assert not is_sufficiently_irrational(SkeletonPoint("F", (Fraction(1, 2),)), m.family, 1)
    assert is_sufficiently_irrational(m.default_anchor, m.family, 12)
    assert not is_sufficiently_irrational(SkeletonPoint("F", (0,)), m.family, 1, m.skeleton)


def test_lipschitz_constant_of_monomials():
    assert lipschitz_constant(monomial(1, l_max=5).family) == 1


def test_basis_dict_round_trip():
    b = tate_circle(l_max=3).family.basis(3)
    again = basis_from_dict(basis_to_dict(b))
    assert [s.terms for s in again.sections] == [s.terms for s in b.sections]


def test_bad_basis_document():
    with pytest.raises(MalformedInput):
        basis_from_dict({"degree": 1, "sections": [{"faces": {"F": [{"a": "1/2"}]}}]})


def test_family_degree_bounds_and_single_build():
    calls = []
    lock = threading.Lock()

    def build(l):
        with lock:
            calls.append(l)
        return DegreeBasis(l, (make_section(l, {"F": [((l,), 0)]}),))

    fam = BasisFamily(SQ, build, 4)
    ordered_map(lambda _: fam.basis(3), range(32), workers=8)
    assert calls == [3]
    with pytest.raises(DegreeMismatch):
        fam.basis(5)
    assert fam.with_l_max(2).degrees() == [1, 2]


@pytest.mark.parametrize("model", [tate_circle(l_max=6), monomial(2, l_max=4)], ids=["tate", "monomial2"])
def test_envelopes_are_convex_and_lipschitz(model):
    rng = np.random.default_rng(0)
    L = float(lipschitz_constant(model.family))
    n = model.n
    for l in (1, model.family.l_max):
        for s in model.family.basis(l).sections:
            a, b = rng.random((500, n)), rng.random((500, n))
            fa, fb = s.evaluate("F", a), s.evaluate("F", b)
            assert np.all(s.evaluate("F", (a + b) / 2) <= (fa + fb) / 2 + 1e-12)
            # sup-norm gradients give an l1 Lipschitz bound
            assert np.all(np.abs(fa - fb) <= l * L * np.abs(a - b).sum(axis=1) + 1e-12)
