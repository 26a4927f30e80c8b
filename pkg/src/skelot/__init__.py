"""Tropical and convex calculus on degeneration skeletons.

Submodules: ``skeleton`` (integral affine complexes and measures),
``tropical`` (sections, chambers, valuative independence), ``cost``
(cost fields and c-transforms), ``okounkov`` (gradient semigroups and
bodies), ``energy`` (Monge-Ampere energy), ``transport`` (semi-discrete
solver and certificates), ``models`` (built-in degenerations) and ``cli``.
"""

from .cost import Anchor, CostField, GridFunction, closed_form_field, fekete_field
from .errors import SkelotError
from .models import Model, ModelSpec, instantiate
from .okounkov import body_measure, gradient_semigroup, okounkov_body
from .skeleton import Skeleton, SkeletonPoint, build_skeleton, lebesgue_measure
from .transport import PotentialPc, laguerre_cells, solve_kantorovich
from .tropical import DegreeBasis, TropicalSection, check_valuative_independence, wall_complex

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "CostField",
    "DegreeBasis",
    "GridFunction",
    "Model",
    "ModelSpec",
    "PotentialPc",
    "Skeleton",
    "SkeletonPoint",
    "SkelotError",
    "TropicalSection",
    "body_measure",
    "build_skeleton",
    "check_valuative_independence",
    "closed_form_field",
    "fekete_field",
    "gradient_semigroup",
    "instantiate",
    "laguerre_cells",
    "lebesgue_measure",
    "okounkov_body",
    "solve_kantorovich",
    "wall_complex",
]
