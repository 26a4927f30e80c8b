import json
from fractions import Fraction

import numpy as np
import pytest

from skelot import io as sio
from skelot.cli import main, parse_args
from skelot.errors import MalformedInput


def test_json_numbers_are_stable():
    text = sio.dumps_json({"a": 0.1, "b": Fraction(1, 3), "c": np.float64(2.5), "d": [1, 2], "e": [{"x": np.int64(3)}]})
    doc = json.loads(text)
    assert doc == {"a": 0.1, "b": "1/3", "c": 2.5, "d": [1, 2], "e": [{"x": 3}]}
    assert '"a": 0.10000000000000001' in text
    assert '"d": [1, 2]' in text


def test_csv_round_trip(tmp_path):
    p = sio.write_csv(tmp_path / "t.csv", ["i", "x", "ok"], [(1, [0.5, 0.25], True)], {"command": "t", "seed": 3})
    meta, header, rows = sio.read_csv(p)
    assert meta == {"command": "t", "seed": "3"}
    assert header == ["i", "x", "ok"]
    assert rows == [["1", "0.5 0.25", "true"]]


def test_malformed_json_reports_line_and_column(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{\n  "n": 1,\n  "faces": [\n}\n')
    with pytest.raises(MalformedInput) as info:
        sio.read_json(f)
    assert info.value.location == "4:1"


def test_require_checks_types():
    assert sio.require({"a": 1}, "a", int) == 1
    with pytest.raises(MalformedInput, match="missing"):
        sio.require({}, "a", int)
    with pytest.raises(MalformedInput) as info:
        sio.require({"a": "x"}, "a", int, "$.doc")
    assert info.value.location == "$.doc.a"


def test_config_keys(tmp_path):
    good = tmp_path / "c.json"
    good.write_text(json.dumps({"solver": {"tol": 1e-8}, "fekete.l_max": 6}))
    cfg = parse_args(["solve", "--config", str(good)])
    assert cfg.get("solver.tol") == 1e-8 and cfg.get("fekete.l_max") == 6
    assert cfg.get("solver.max_iter") == 5000
    bad = tmp_path / "d.json"
    bad.write_text(json.dumps({"solver": {"tolerance": 1}}))
    with pytest.raises(MalformedInput, match="unknown config"):
        parse_args(["solve", "--config", str(bad)])


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_validate_ok(tmp_path):
    assert run(tmp_path, "validate", "--model", "monomial:n=2", "--lmax", "3") == 0
    _, _, rows = sio.read_csv(tmp_path / "verdict.csv")
    assert [r[0] for r in rows] == ["1", "2", "3"]
    assert sio.read_json(tmp_path / "verdict.json")["valid"] is True


def test_validate_duplicated_basis_writes_witness(tmp_path):
    doc = {
        "skeleton": {"n": 1, "faces": [{"id": "F", "vertices": [["0"], ["1"]]}]},
        "bases": [
            {
                "degree": 2,
                "sections": [
                    {"label": "a", "faces": {"F": [{"p": [1], "a": "0"}, {"p": [2], "a": "1/2"}]}},
                    {"label": "b", "faces": {"F": [{"p": [1], "a": "0"}]}},
                ],
            }
        ],
    }
    f = tmp_path / "basis.json"
    f.write_text(json.dumps(doc))
    assert run(tmp_path, "validate", "--basis", str(f)) == 2
    w = sio.read_json(tmp_path / "witness.json")
    assert w["pair"] == ["a", "b"] and w["gradient"] == [1]
    assert w["chamber"]["face"] == "F"


def test_malformed_inputs_exit_1(tmp_path, capsys):
    f = tmp_path / "broken.json"
    f.write_text('{"kind": "monomial",\n "n": }')
    assert run(tmp_path, "okounkov", "--model", str(f)) == 1
    assert "2:7" in capsys.readouterr().err
    assert run(tmp_path, "okounkov", "--model", "sphere") == 1
    assert run(tmp_path, "solve", "--model", "monomial", "--tol", "-1") == 1
    assert run(tmp_path, "cost", "--model", "monomial", "--anchor", "F:1/2,1/2") == 1


def test_okounkov_and_cost_outputs(tmp_path):
    assert run(tmp_path, "okounkov", "--model", "tate_circle", "--lmax", "8", "--svg") == 0
    body = sio.read_json(tmp_path / "body.json")
    assert body["vertices"] == [["-1/3"], ["5/8"]]
    assert (tmp_path / "body.svg").exists()
    assert run(tmp_path, "cost", "--model", "monomial", "--grid-h", "0.25", "--body-scheme", "lattice:2") == 0
    _, header, rows = sio.read_csv(tmp_path / "cost.csv")
    assert header == ["node", "sample", "x", "p", "cost"] and len(rows) == 10


def test_solve_nonconvergence_exit_3(tmp_path):
    code = run(tmp_path, "solve", "--model", "monomial:n=2", "--body-scheme", "lattice:4", "--tol", "1e-14", "--max-iter", "0")
    assert code == 3
    cert = sio.read_json(tmp_path / "certificate.json")
    assert cert["converged"] is False and cert["residual_inf"] > 1e-14
    assert (tmp_path / "weights.csv").exists()


def test_solve_writes_certificate(tmp_path):
    assert run(tmp_path, "solve", "--model", "monomial", "--body-scheme", "lattice:8", "--svg") == 0
    cert = sio.read_json(tmp_path / "certificate.json")
    assert cert["converged"] is True and cert["residual_inf"] <= 1e-6
    assert cert["comparison"]["passed"] == cert["comparison"]["tested"]
    assert (tmp_path / "cells.svg").exists() and (tmp_path / "convergence.svg").exists()
