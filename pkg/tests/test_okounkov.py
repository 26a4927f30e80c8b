from fractions import Fraction

import numpy as np
import pytest

from skelot.cost import Anchor
from skelot.errors import PNotInBody
from skelot.models import monomial, random_model, tate_circle
from skelot.okounkov import (
    body_measure,
    body_volume_check,
    central_box,
    containment_in_transform_domain,
    gradient_semigroup,
    integer_points_check,
    okounkov_body,
    parse_body_scheme,
)
from skelot.polytope import convex_hull


def _body(model, l_max=None):
    g = gradient_semigroup(model.family, Anchor(model.default_anchor), l_max)
    return g, okounkov_body(g)


@pytest.mark.parametrize("n,Ln,vol", [(1, None, 1), (2, None, 1), (2, 1, Fraction(1, 2))])
def test_monomial_volume(n, Ln, vol):
    m = monomial(n, Ln=Ln, l_max=5)
    g, body = _body(m)
    assert body.volume == vol
    rep = body_volume_check(body, m.Ln, n, g)
    assert rep.discrepancy == 0
    assert rep.counts[-1][0] == 5


def test_monomial_semigroup_is_additive():
    g, _ = _body(monomial(2, l_max=4))
    assert g.additivity_failures() == []
    assert g.level(2) == frozenset((a, b) for a in range(3) for b in range(3))


def test_tate_body_grows_inside_the_limit_body():
    m = tate_circle(l_max=32)
    y = float(m.default_anchor.coords[0])
    prev = None
    for l_max in (4, 8, 16, 32):
        _, body = _body(m, l_max)
        lo, hi = (float(v[0]) for v in body.bounding_box())
        assert y - 0.5 <= lo and hi <= y + 0.5
        if prev is not None:
            assert lo <= prev[0] and hi >= prev[1]
        prev = (lo, hi)


def test_integer_points_on_monomials():
    g, body = _body(monomial(2, l_max=6))
    rep = integer_points_check(g, central_box(body), body)
    assert rep.l0 == 1 and rep.missing == ()


def test_integer_points_needs_interior_box():
    g, body = _body(monomial(1, l_max=4))
    with pytest.raises(PNotInBody):
        integer_points_check(g, body, body)


def test_central_box_is_scaled():
    body = convex_hull([(0, 0), (2, 0), (0, 1), (2, 1)])
    K = central_box(body, 0.5)
    assert K.bounding_box() == ((Fraction(1, 2), Fraction(1, 4)), (Fraction(3, 2), Fraction(3, 4)))


def test_body_contained_in_gradient_set():
    m = random_model(1, l_max=4, seed=2)
    g, _ = _body(m)
    assert containment_in_transform_domain(g, m.family)


@pytest.mark.parametrize("scheme,res", [("lattice", 8), ("centroid", Fraction(1, 5))])
def test_body_measure_is_probability(scheme, res):
    body = convex_hull([(0, 0), (1, 0), (0, 1)])
    nu = body_measure(body, scheme, res)
    assert nu.weights.sum() == pytest.approx(1.0)
    assert np.all(nu.weights > 0)
    assert body.contains_float(nu.samples, tol=1e-12).all()
    assert nu.volume == 0.5


def test_lattice_measure_on_interval():
    body = convex_hull([(Fraction(-1, 3),), (Fraction(5, 8),)])
    nu = body_measure(body, "lattice", 8)
    # cells [-1/3,-1/4], ..., [1/2,5/8]
    assert len(nu) == 8
    assert nu.samples[0, 0] == pytest.approx((-1 / 3 - 1 / 4) / 2)


def test_parse_body_scheme():
    assert parse_body_scheme("lattice:16") == ("lattice", 16)
    assert parse_body_scheme("centroid:1/4") == ("centroid", Fraction(1, 4))
    with pytest.raises(ValueError):
        parse_body_scheme("poisson:3")


@pytest.mark.parametrize("model", [tate_circle(l_max=12), monomial(2, Ln=1, l_max=6)], ids=["tate", "simplex"])
def test_semigroup_additivity_on_shipped_models(model):
    g, _ = _body(model)
    assert g.additivity_failures() == []


def test_central_box_fits_a_thin_triangle():
    body = convex_hull([(0, 0), (2, 1), (1, 1)])
    K = central_box(body)
    assert all(body.contains(v, strict=True) for v in K.vertices)
    # center (1, 2/3), half-widths (1, 1/2); the edge x = 2y caps the scale at 1/6
    assert K.bounding_box() == ((Fraction(9, 10), Fraction(37, 60)), (Fraction(11, 10), Fraction(43, 60)))
