from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from skelot import rational as rq

fracs = st.fractions(min_value=-50, max_value=50, max_denominator=40)


def test_to_fraction_accepts_strings_floats_and_ints():
    assert rq.to_fraction("3/4") == Fraction(3, 4)
    assert rq.to_fraction(0.5) == Fraction(1, 2)
    assert rq.to_fraction(7) == Fraction(7)
    with pytest.raises(TypeError):
        rq.to_fraction(True)


def test_float_conversion_is_exact():
    assert rq.to_fraction(0.1) == Fraction(0.1)
    assert rq.to_fraction(0.1) != Fraction(1, 10)


@given(fracs)
def test_fmt_fraction_round_trip(x):
    assert Fraction(rq.fmt_fraction(x)) == x
    assert "/" in rq.fmt_fraction(x)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_float_round_trip(x):
    assert float(rq.fmt_float(x)) == x


def test_primitive_normalizes_normals():
    assert rq.primitive([Fraction(2, 3), Fraction(4, 3)]) == (1, 2)
    a, b = rq.primitive([2, -4], 6)
    assert a == (1, -2) and b == 3


@given(st.lists(st.lists(fracs, min_size=3, max_size=3), min_size=3, max_size=3))
def test_solve_agrees_with_det(a):
    b = [Fraction(1), Fraction(2), Fraction(3)]
    x = rq.solve(a, b)
    if rq.det(a) == 0:
        assert rq.rank(a) < 3
    else:
        assert x is not None
        assert all(rq.dot(row, x) == bi for row, bi in zip(a, b))


@given(st.lists(st.lists(fracs, min_size=3, max_size=3), min_size=1, max_size=3))
def test_nullspace_is_annihilated(rows):
    basis = rq.nullspace(rows, 3)
    assert len(basis) == 3 - rq.rank(rows)
    for v in basis:
        assert all(rq.dot(r, v) == 0 for r in rows)


def test_affine_rank():
    assert rq.affine_rank([(0, 0), (1, 1), (2, 2)]) == 1
    assert rq.affine_rank([(0, 0), (1, 0), (0, 1)]) == 2
    assert rq.affine_rank([(3, 3)]) == 0
