"""Monge-Ampere energy as a relative-volume limit and as a body integral."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cost import CostField, GridFunction, c_transform_skeleton_to_body, project_to_Pc
from .errors import DegreeMismatch
from .okounkov import BodyMeasure
from .parallel import ordered_map
from .skeleton import SkeletonPoint
from .tropical import BasisFamily, DegreeBasis

DEFAULT_SCHEDULE = (4, 8, 16, 32)


@dataclass(frozen=True)
class DiagonalNorm:
    degree: int
    log_norms: np.ndarray
    labels: tuple = ()

    def __len__(self) -> int:
        return len(self.log_norms)


def sup_norm_diagonal(b: DegreeBasis, phi: GridFunction, y: SkeletonPoint | None = None, face: str = "F") -> DiagonalNorm:
    """``log ||theta|| = max_x log|theta|(x) - l phi(x)`` over the grid nodes of ``phi``."""
    face = y.face if y is not None else face
    l = b.degree
    out = np.array([float(np.max(s.evaluate(face, phi.points) - l * phi.values)) for s in b.sections])
    return DiagonalNorm(l, out, tuple(s.label for s in b.sections))


def relative_volume(n1: DiagonalNorm, n2: DiagonalNorm) -> float:
    """``sum_alpha log||theta_alpha||_2 - log||theta_alpha||_1`` for simultaneously diagonal norms."""
    if n1.degree != n2.degree or len(n1) != len(n2):
        raise DegreeMismatch(f"norms of degree {n1.degree} ({len(n1)}) and {n2.degree} ({len(n2)})")
    return float(np.sum(n2.log_norms - n1.log_norms))


def in_Pc(phi: GridFunction, cf: CostField, samples: np.ndarray, tol: float = 1e-10) -> tuple[GridFunction, bool]:
    """Return (projection, flag) where flag says the input already was a fixed point."""
    proj = project_to_Pc(phi, cf, samples)
    ok = bool(np.max(np.abs(proj.values - phi.values)) <= tol)
    return (phi if ok else GridFunction(phi.points, proj.values)), ok


def ma_energy_integral(phi: GridFunction, cf: CostField, nu: BodyMeasure, Ln, C: np.ndarray | None = None) -> float:
    """``-(L^n) sum_j nu_j phi^c(p_j)``."""
    fc = c_transform_skeleton_to_body(phi, cf, nu.samples, C)
    return -float(Ln) * float(np.dot(nu.weights, fc.values))


@dataclass(frozen=True)
class EnergyReport:
    degrees: tuple
    limit_values: tuple
    cauchy_gaps: tuple
    integral_value: float
    discrepancy: float
    projected: tuple = (False, False)

    def within(self, slack: float) -> bool:
        gap = self.cauchy_gaps[-1] if self.cauchy_gaps else math.inf
        return self.discrepancy <= gap + slack


def energy_consistency(
    phi: GridFunction,
    psi: GridFunction,
    family: BasisFamily,
    cf: CostField,
    nu: BodyMeasure,
    Ln,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    workers: int | None = None,
) -> EnergyReport:
    """Compare ``n!/l^(n+1) vol(||.||_{l phi}, ||.||_{l psi})`` with ``-(L^n) int (phi^c - psi^c) dnu``.

    Inputs outside P_c are projected first and flagged in the report.
    """
    n = family.n
    phi, ok1 = in_Pc(phi, cf, nu.samples)
    psi, ok2 = in_Pc(psi, cf, nu.samples)
    degrees = [l for l in schedule if l <= family.l_max]

    def limit(l):
        b = family.basis(l)
        vol = relative_volume(sup_norm_diagonal(b, phi, cf.anchor.y), sup_norm_diagonal(b, psi, cf.anchor.y))
        return math.factorial(n) / l ** (n + 1) * vol

    values = ordered_map(limit, degrees, workers)
    gaps = tuple(abs(b - a) for a, b in zip(values, values[1:]))
    C = cf.evaluate(phi.points, nu.samples)
    integral = ma_energy_integral(phi, cf, nu, Ln, C) - ma_energy_integral(psi, cf, nu, Ln, C)
    disc = abs(values[-1] - integral) if values else math.inf
    return EnergyReport(tuple(degrees), tuple(values), gaps, integral, disc, (not ok1, not ok2))
