from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import closed_field
from oracles import tate_cost_limit, tate_cost_oracle
from skelot.cost import (
    Anchor,
    GridFunction,
    affine_domain,
    c_transform_body_to_skeleton,
    c_transform_skeleton_to_body,
    fekete_cost,
    fekete_field,
    make_anchor,
    project_to_Pc,
)
from skelot.errors import NoLatticePoint, PNotInBody, ShrunkToPoint
from skelot.models import monomial, random_model, tate_circle
from skelot.polytope import convex_hull
from skelot.skeleton import SkeletonPoint

TATE = tate_circle(l_max=64)
MONO2 = monomial(2, l_max=8)


def test_linear_cost_is_pairing():
    cf = closed_field(MONO2)
    x = np.array([[0.2, 0.9], [0.7, 0.1]])
    p = np.array([[0.3, 0.5]])
    assert np.allclose(cf.evaluate(x, p)[:, 0], (x - cf.y) @ p[0])


@pytest.mark.parametrize("model", [TATE, MONO2])
def test_cost_vanishes_at_anchor(model):
    cf = closed_field(model)
    lo, hi = (np.array([float(v) for v in a]) for a in cf.body_hint.bounding_box())
    ps = np.random.default_rng(0).uniform(lo, hi, size=(20, model.n))
    assert np.allclose(cf.evaluate(cf.y[None, :], ps), 0, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 0.95))
def test_tate_cost_convex_in_x(a, b, t):
    cf = closed_field(TATE)
    lo, hi = (float(v[0]) for v in cf.body_hint.bounding_box())
    p = np.array([[lo + 0.37 * (hi - lo)]])
    xs = np.array([[a], [b], [t * a + (1 - t) * b]])
    c = cf.evaluate(xs, p)[:, 0]
    assert c[2] <= t * c[0] + (1 - t) * c[1] + 1e-12


def test_tate_closed_form_matches_limit_formula():
    cf = closed_field(TATE)
    y = float(cf.y[0])
    for x, p in [(0.1, 0.0), (0.5, -0.2), (0.9, 0.4), (0.0, 0.1)]:
        assert cf.value([x], [p]) == pytest.approx(tate_cost_limit(x, p, y), abs=1e-12)


def test_tate_fekete_approaches_closed_form():
    cf = closed_field(TATE)
    y = TATE.default_anchor.coords[0]
    x = Fraction(3, 10)
    for p in (Fraction(1, 8), Fraction(-1, 4)):
        c_l = tate_cost_oracle(64, x, float(p), y)
        assert abs(c_l - cf.value([float(x)], [float(p)])) < 2 / 64


def test_fekete_cost_on_monomials_is_exact():
    anchor = Anchor(MONO2.default_anchor)
    x = SkeletonPoint("F", (Fraction(1, 5), Fraction(4, 5)))
    v = fekete_cost(MONO2.family, x, [0.25, 0.5], anchor)
    y = anchor.coords
    assert v.value == pytest.approx(0.25 * (0.2 - y[0]) + 0.5 * (0.8 - y[1]), abs=1e-14)
    assert v.degree == 8 and v.lattice_point == (2, 4)


def test_fekete_cost_errors():
    anchor = Anchor(MONO2.default_anchor)
    x = SkeletonPoint("F", (Fraction(1, 2), Fraction(1, 2)))
    body = convex_hull([(0, 0), (1, 0), (0, 1), (1, 1)])
    with pytest.raises(PNotInBody):
        fekete_cost(MONO2.family, x, [1.5, 0.5], anchor, body=body)
    with pytest.raises(NoLatticePoint):
        fekete_cost(MONO2.family, x, [3.0, 0.5], anchor)


def test_make_anchor_records_irrationality():
    a = make_anchor(TATE.skeleton, TATE.default_anchor, TATE.family, 16)
    assert a.irrationality_level == 16
    b = make_anchor(TATE.skeleton, SkeletonPoint("F", (Fraction(1, 2),)), TATE.family, 4)
    assert b.irrationality_level is None
    with pytest.raises(ValueError):
        make_anchor(TATE.skeleton, SkeletonPoint("F", (0,)))


def test_rematch_keeps_cost_up_to_constant():
    cf = closed_field(TATE)
    p = np.array([0.1])
    y2 = np.array([0.8])
    p2 = cf.rematch(p, y2)
    cf2 = cf.with_anchor(Anchor(SkeletonPoint("F", (Fraction(4, 5),))))
    assert cf2.body_hint.contains_float(p2[None, :])[0]
    xs = np.linspace(0, 1, 11)[:, None]
    diff = cf.evaluate(xs, p[None, :])[:, 0] - cf2.evaluate(xs, p2[None, :])[:, 0]
    assert np.ptp(diff) < 1e-12


# -- c-transforms ----------------------------------------------------------------------


def _setup(model, seed=0):
    cf = closed_field(model)
    rng = np.random.default_rng(seed)
    X = rng.random((40, model.n))
    lo, hi = (np.array([float(v) for v in a]) for a in cf.body_hint.bounding_box())
    P = rng.uniform(lo, hi, size=(30, model.n))
    return cf, X, P, rng


@pytest.mark.parametrize("model", [TATE, MONO2])
def test_transform_reverses_order_and_contracts(model):
    cf, X, P, rng = _setup(model)
    C = cf.evaluate(X, P)
    f = GridFunction(X, rng.normal(size=len(X)))
    g = GridFunction(X, f.values + np.abs(rng.normal(size=len(X))))
    fc = c_transform_skeleton_to_body(f, cf, P, C)
    gc = c_transform_skeleton_to_body(g, cf, P, C)
    assert np.all(gc.values <= fc.values + 1e-12)
    h = GridFunction(X, f.values + rng.uniform(-0.3, 0.3, len(X)))
    hc = c_transform_skeleton_to_body(h, cf, P, C)
    assert np.max(np.abs(hc.values - fc.values)) <= np.max(np.abs(h.values - f.values)) + 1e-12


@pytest.mark.parametrize("model", [TATE, MONO2])
def test_double_and_triple_transform(model):
    cf, X, P, rng = _setup(model, 1)
    C = cf.evaluate(X, P)
    f = GridFunction(X, rng.normal(size=len(X)))
    fc = c_transform_skeleton_to_body(f, cf, P, C)
    fcc = c_transform_body_to_skeleton(fc, cf, X, C)
    assert np.all(fcc.values <= f.values + 1e-12)
    fccc = c_transform_skeleton_to_body(fcc, cf, P, C)
    assert np.max(np.abs(fccc.values - fc.values)) <= 1e-12
    proj = project_to_Pc(f, cf, P, C)
    assert np.allclose(proj.values, fcc.values)
    assert np.allclose(project_to_Pc(proj, cf, P, C).values, proj.values, atol=1e-12)


def test_transform_ties_go_to_lowest_index():
    cf = closed_field(MONO2)
    X = np.array([[0.5, 0.5], [0.5, 0.5]])
    f = GridFunction(X, np.zeros(2))
    assert c_transform_skeleton_to_body(f, cf, np.array([[0.2, 0.2]])).argmax.tolist() == [0]


def test_grid_function_rejects_nonfinite():
    with pytest.raises(ValueError):
        GridFunction(np.zeros((1, 1)), np.array([np.inf]))


# -- affine domains -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def tate_mid():
    m = tate_circle(l_max=12)
    y = SkeletonPoint("F", (Fraction(50001, 100003),))
    return m, fekete_field(m.family, make_anchor(m.skeleton, y, m.family), 12)


def test_affine_domain_on_monomials_is_the_face():
    cf = fekete_field(MONO2.family, Anchor(MONO2.default_anchor))
    U = affine_domain(cf, convex_hull([(0, 0), (1, 0), (0, 1), (1, 1)]))
    assert U.polytope.volume == 1 and U.n_constraints == 0


def test_affine_domain_shrinks_as_K_grows(tate_mid):
    _, cf = tate_mid
    half = Fraction(1, 2)
    vols = []
    for r in (Fraction(1, 20), Fraction(1, 10), Fraction(1, 5), Fraction(2, 5)):
        U = affine_domain(cf, convex_hull([(half - r,), (half + r,)]))
        assert U.polytope.contains(cf.anchor.y.coords, strict=True)
        vols.append(U.polytope.volume)
    assert vols == sorted(vols, reverse=True)


def test_cost_is_affine_on_the_domain(tate_mid):
    m, cf = tate_mid
    K = convex_hull([(Fraction(3, 10),), (Fraction(7, 10),)])
    U = affine_domain(cf, K)
    lo, hi = (float(v[0]) for v in U.polytope.bounding_box())
    xs = np.linspace(lo, hi, 9)[:, None]
    y = float(cf.y[0])
    for q in range(4, 9):
        p = q / 12
        assert np.allclose(cf.evaluate(xs, np.array([[p]]))[:, 0], p * (xs[:, 0] - y), atol=1e-12)


def test_affine_domain_failures(tate_mid):
    _, cf = tate_mid
    with pytest.raises(ShrunkToPoint):
        affine_domain(cf, convex_hull([(Fraction(1, 12),), (Fraction(11, 12),)]))
    with pytest.raises(PNotInBody):
        affine_domain(cf, convex_hull([(Fraction(1, 100),), (Fraction(99, 100),)]))


def test_fekete_field_on_random_single_term_matches_linear():
    m = random_model(2, l_max=4, seed=3, term_budget=0)
    anchor = Anchor(m.default_anchor)
    ff = fekete_field(m.family, anchor)
    lin = closed_field(m)
    X = np.random.default_rng(0).random((10, 2))
    P = np.array([[float(v) for v in pt] for pt in ff.body_hint.vertices])
    assert np.allclose(ff.evaluate(X, P), lin.evaluate(X, P), atol=1e-12)
