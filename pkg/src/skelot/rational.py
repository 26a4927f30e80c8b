"""Exact rational helpers: parsing, formatting and small dense linear algebra."""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from numbers import Rational
from typing import Iterable, Sequence

Vector = tuple  # tuple[Fraction, ...]


def to_fraction(value) -> Fraction:
    """Convert ints, Fractions, floats (exactly) and "p/q" strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    try:
        return Fraction(float(value))
    except (TypeError, ValueError) as exc:
        raise TypeError(f"cannot interpret {value!r} as a rational") from exc


def to_vector(values: Iterable) -> Vector:
    return tuple(to_fraction(v) for v in values)


def fmt_fraction(value) -> str:
    """Serialize as "p/q" (always with a denominator)."""
    f = to_fraction(value)
    return f"{f.numerator}/{f.denominator}"


def fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def sub(a: Sequence, b: Sequence) -> Vector:
    return tuple(x - y for x, y in zip(a, b))


def add(a: Sequence, b: Sequence) -> Vector:
    return tuple(x + y for x, y in zip(a, b))


def scale(c, a: Sequence) -> Vector:
    return tuple(c * x for x in a)


def primitive(a: Sequence, b=None):
    """Scale a rational normal (and offset) to the primitive integer vector."""
    entries = [to_fraction(x) for x in a] + ([to_fraction(b)] if b is not None else [])
    den = 1
    for x in entries:
        den = lcm(den, x.denominator)
    ints = [int(x * den) for x in entries]
    g = 0
    for x in ints[: len(a)]:
        g = gcd(g, abs(x))
    if g == 0:
        g = 1
    ints = [Fraction(x, g) for x in ints]
    if b is None:
        return tuple(ints)
    return tuple(ints[:-1]), ints[-1]


def row_reduce(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns)."""
    m = [list(r) for r in rows]
    pivots: list[int] = []
    if not m:
        return m, pivots
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    return len(row_reduce([[to_fraction(x) for x in r] for r in rows])[1])


def affine_rank(points: Sequence[Sequence]) -> int:
    if len(points) <= 1:
        return 0
    p0 = points[0]
    return rank([sub(p, p0) for p in points[1:]])


def solve(a: Sequence[Sequence], b: Sequence) -> Vector | None:
    """Solve a square system exactly; None if singular."""
    n = len(a)
    aug = [[to_fraction(x) for x in row] + [to_fraction(bi)] for row, bi in zip(a, b)]
    red, piv = row_reduce(aug)
    if piv != list(range(n)):
        return None
    return tuple(red[i][n] for i in range(n))


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[Vector]:
    """Basis of the right nullspace of a rational matrix."""
    if not rows:
        return [tuple(Fraction(int(i == j)) for j in range(ncols)) for i in range(ncols)]
    red, piv = row_reduce([[to_fraction(x) for x in r] for r in rows])
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = -red[i][f]
        basis.append(tuple(v))
    return basis


def det(a: Sequence[Sequence]) -> Fraction:
    m = [[to_fraction(x) for x in row] for row in a]
    n = len(m)
    sign = 1
    result = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            sign = -sign
        result *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] / m[c][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return sign * result
