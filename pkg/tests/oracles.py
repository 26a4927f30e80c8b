"""Independent reference computations used by the tests.

None of these call into the solver paths they check; they work from the
raw term data or from closed formulas.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np


# -- max-plus expansion -------------------------------------------------------------------


def expand_combination(sections, face: str, vals: Sequence[Fraction], units: Sequence[int]) -> dict:
    """Formal expansion of ``sum_a u_a t^{v_a} theta_a`` on one face.

    Each term ``<p, x> - a`` of a section stands for the monomial
    ``t^a z^p`` with unit coefficient 1. Returns gradient -> valuation of its
    total coefficient (the smallest t-order whose integer coefficient does not
    cancel). Fully cancelled gradients are omitted.
    """
    coeff: dict[tuple, dict[Fraction, int]] = {}
    for s, v, u in zip(sections, vals, units):
        for t in s.terms[face]:
            orders = coeff.setdefault(tuple(t.gradient), {})
            key = Fraction(t.shift) + Fraction(v)
            orders[key] = orders.get(key, 0) + u
    out = {}
    for p, orders in coeff.items():
        live = [o for o, c in orders.items() if c != 0]
        if live:
            out[p] = min(live)
    return out


def expansion_log_norm(expanded: dict, x: Sequence[Fraction]):
    """``max_p <p, x> - val_p`` of an expanded combination; None when everything cancelled."""
    if not expanded:
        return None
    return max(sum(Fraction(a) * Fraction(b) for a, b in zip(p, x)) - v for p, v in expanded.items())


def maxplus_value(sections, face: str, vals: Sequence[Fraction], x: Sequence[Fraction]) -> Fraction:
    """``max_a (log|theta_a|(x) - v_a)`` computed directly from the terms."""
    best = None
    for s, v in zip(sections, vals):
        f = max(sum(Fraction(g) * Fraction(c) for g, c in zip(t.gradient, x)) - Fraction(t.shift) for t in s.terms[face])
        f -= Fraction(v)
        best = f if best is None or f > best else best
    return best


# -- Tate circle, brute force -----------------------------------------------------------------


def tate_section_value(l: int, j: int, x: Fraction, d: int = 1, M: int | None = None) -> Fraction:
    """``max_{m = j mod dl, |m| <= M} -m x - m^2 / (2 d l)`` by direct enumeration."""
    dl = d * l
    M = M if M is not None else 4 * dl + 8
    best = None
    for m in range(-M, M + 1):
        if (m - j) % dl:
            continue
        v = -m * Fraction(x) - Fraction(m * m, 2 * dl)
        best = v if best is None or v > best else best
    return best


def tate_cost_oracle(l: int, x: Fraction, p: float, y: Fraction, d: int = 1) -> float:
    """Degree-l approximation of the Tate cost from the section whose gradient at y is round(l p)."""
    q = int(round(l * p))
    j = (-q) % (d * l)
    return float((tate_section_value(l, j, x, d) - tate_section_value(l, j, y, d)) / l)


def tate_cost_limit(x: float, p: float, y: float, d: int = 1) -> float:
    """``g_p(x) - g_p(y)`` with ``g_p(x) = max_k (p + d k) x - (p + d k)^2 / (2 d)``."""

    def g(z):
        ks = range(-6, 7)
        return max((p + d * k) * z - (p + d * k) ** 2 / (2 * d) for k in ks)

    return g(x) - g(y)


# -- one-dimensional monotone transport -------------------------------------------------------------


def step_cdf_inverse(edges: Sequence[float], dens: Sequence[float], mass: float) -> float:
    """Inverse CDF of a normalized step density on [edges[0], edges[-1]]."""
    acc = 0.0
    for a, b, v in zip(edges, edges[1:], dens):
        m = v * (b - a)
        if acc + m >= mass and v > 0:
            return a + (mass - acc) / v
        acc += m
    return edges[-1]


def monotone_boundaries(edges, dens, weights_sorted) -> list[float]:
    cum = np.cumsum(weights_sorted)[:-1]
    return [step_cdf_inverse(edges, dens, float(c)) for c in cum]


# -- Monte Carlo ---------------------------------------------------------------------------------


def monte_carlo_masses(argmax_fn, n: int, dim: int, k: int, seed: int, chunk: int = 200_000):
    """Fractions of n uniform points of [0,1]^dim assigned to each of k labels."""
    rng = np.random.default_rng(seed)
    counts = np.zeros(k)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        X = rng.random((m, dim))
        counts += np.bincount(argmax_fn(X), minlength=k)
        done += m
    return counts / n


# -- polygons ----------------------------------------------------------------------------------


def shapely_clip_area(ring, lo, hi) -> float:
    from shapely.geometry import Polygon, box

    return Polygon(ring).intersection(box(lo[0], lo[1], hi[0], hi[1])).area


def lattice_points_in_box(lo, hi, l: int) -> list[tuple]:
    import itertools

    rng = [range(math.ceil(l * a), math.floor(l * b) + 1) for a, b in zip(lo, hi)]
    return list(itertools.product(*rng))
