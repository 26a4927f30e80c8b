from fractions import Fraction

import numpy as np
import pytest

from skelot.errors import DegenerateFace, InconsistentGluing, MalformedInput, ZeroMass
from skelot.models import tate_skeleton
from skelot.skeleton import (
    build_skeleton,
    integrate,
    lebesgue_measure,
    node_grid,
    skeleton_from_json_text,
    skeleton_grid,
    skeleton_to_spec,
    unit_cube,
)


def test_unit_square_lower_faces():
    s = unit_cube(2)
    assert s.top_faces == ("F",)
    dims = sorted(s.faces[f].dim for f in s.lower_faces())
    assert dims == [0, 0, 0, 0, 1, 1, 1, 1]


def test_round_trip_spec():
    s = tate_skeleton()
    again = build_skeleton(skeleton_to_spec(s))
    assert again.top_faces == s.top_faces
    assert len(again.gluings) == len(s.gluings)


def test_missing_keys_are_malformed():
    with pytest.raises(MalformedInput):
        build_skeleton({"faces": []})
    with pytest.raises(MalformedInput):
        build_skeleton({"n": 1, "faces": [{"id": "A"}]})


def test_repeated_vertex_is_degenerate():
    with pytest.raises(DegenerateFace):
        build_skeleton({"n": 1, "faces": [{"id": "A", "vertices": [[0], [0]]}]})


def test_non_unimodular_gluing_rejected():
    spec = {
        "n": 1,
        "faces": [{"id": "A", "vertices": [[0], [1]]}],
        "gluings": [{"from": "A", "to": "A", "linear": [[2]], "translate": [0]}],
    }
    with pytest.raises(InconsistentGluing):
        build_skeleton(spec)


def test_json_syntax_error_has_location():
    with pytest.raises(MalformedInput) as info:
        skeleton_from_json_text('{"n": 1,\n "faces": [}')
    assert info.value.location == "2:12"


def test_measure_normalized_with_step_density():
    s = unit_cube(1)
    mu = lebesgue_measure(s, {"F": [{"lo": [0], "hi": ["1/2"], "value": 1}, {"lo": ["1/2"], "hi": [1], "value": 3}]})
    assert mu.total_mass == 1
    assert mu.box_mass("F", (0.0,), (0.5,)) == pytest.approx(0.25)
    assert mu.density_at("F", np.array([[0.25], [0.75]])).tolist() == [0.5, 1.5]


def test_zero_mass_raises():
    with pytest.raises(ZeroMass):
        lebesgue_measure(unit_cube(1), {"F": 0})


def test_grid_weights_sum_to_one():
    mu = lebesgue_measure(unit_cube(2))
    g = skeleton_grid(mu, 1 / 16)
    assert len(g) == 256
    assert g.weights.sum() == pytest.approx(1.0)


def test_midpoint_rule_exact_for_affine():
    mu = lebesgue_measure(unit_cube(2))
    val = integrate(mu, lambda x, f: 2 * x[:, 0] - x[:, 1] + 1, 1 / 8)
    assert val == pytest.approx(1.5, abs=1e-14)


def test_node_grid_includes_boundary():
    g = node_grid(unit_cube(1), 0.25)
    assert np.allclose(np.sort(g.points[:, 0]), [0, 0.25, 0.5, 0.75, 1])


def test_point_interior():
    s = unit_cube(2)
    assert s.is_interior(s.point("F", (Fraction(1, 3), Fraction(1, 2))))
    assert not s.is_interior(s.point("F", (0, Fraction(1, 2))))
