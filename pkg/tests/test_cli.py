import json

import numpy as np
import pytest

from polysmith import cli
from polysmith.errors import ParseError, ValidationError

from conftest import FIXTURES


def run_cli(capsys, argv):
    code = cli.run(argv)
    out = capsys.readouterr().out.strip().splitlines()[-1]
    return json.loads(out), code


def test_parse_minimal_document(tmp_path):
    path = tmp_path / "one.json"
    path.write_text('{"rows":1,"cols":1,"entries":[[[1.0]]]}')
    doc = cli.parse(str(path))
    mat = doc.to_matpoly()
    assert mat.rows == mat.cols == 1
    assert mat.entry(0, 0).coeffs.tolist() == [1.0]


def test_parse_ex1_fixture_degree():
    doc = cli.parse(str(FIXTURES / "ex1.json"))
    assert doc.to_matpoly().degree() == 3
    assert doc.structure == "support"


def test_parse_ragged_grid_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"rows":2,"cols":2,"entries":[[[1.0]],[[1.0],[2.0]]]}')
    with pytest.raises(ValidationError):
        cli.parse(str(path))


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        cli.parse(str(tmp_path / "missing.json"))
    bad = tmp_path / "syntax.json"
    bad.write_text("{nope")
    with pytest.raises(ParseError):
        cli.parse(str(bad))


def test_serialize_parse_round_trip(tmp_path):
    doc = cli.parse(str(FIXTURES / "ex1.json"))
    path = tmp_path / "copy.json"
    path.write_text(cli.serialize(doc))
    again = cli.parse(str(path))
    assert again == doc


def test_check_reports_unattainable(capsys):
    report, code = run_cli(capsys, ["check", str(FIXTURES / "unattainable_C.json")])
    assert code == 0
    assert report["unattainable"] is True
    assert report["reversal_invariant_structure"] == [[0, 2], [2, 2]]


def test_check_determinism(capsys):
    first, _ = run_cli(capsys, ["check", str(FIXTURES / "ex1.json")])
    second, _ = run_cli(capsys, ["check", str(FIXTURES / "ex1.json")])
    first.pop("wall_seconds")
    second.pop("wall_seconds")
    assert first == second


def test_exit_code_validation_error(capsys, tmp_path):
    path = tmp_path / "rect.json"
    path.write_text('{"rows":1,"cols":2,"entries":[[[1.0],[2.0]]]}')
    _, code = run_cli(capsys, ["check", str(path)])
    assert code == cli.EXIT_INVALID


def test_exit_code_unattainable(capsys):
    _, code = run_cli(
        capsys, ["snf", str(FIXTURES / "unattainable_C.json"), "--deg-h", "2"]
    )
    assert code == cli.EXIT_UNATTAINABLE


def test_snf_small_instance_through_cli(capsys, tmp_path):
    f = np.polynomial.polynomial.polyfromroots([0.6, 1.1]) * 0.9
    g = np.polynomial.polynomial.polyfromroots([0.8, -1.0]) * 0.7
    doc = {
        "rows": 2,
        "cols": 2,
        "entries": [[list(f), [0.0]], [[0.0], list(g)]],
        "structure": "degree",
    }
    path = tmp_path / "diag.json"
    path.write_text(json.dumps(doc))
    report, code = run_cli(capsys, ["snf", str(path), "--deg-h", "1"])
    assert code == 0
    assert report["certified"] is True
    assert report["trace"]["termination"] == "GradTol"
    assert 0.0 < report["distance"] < 0.2
    assert len(report["divisor"]) == 2


def test_mccoy_small_instance_through_cli(capsys, tmp_path):
    rng = np.random.default_rng(5)
    base = rng.normal(size=(2, 2))
    entries = [
        [[-0.5 * base[0, 0], base[0, 0]], [-0.5 * base[0, 1], base[0, 1]]],
        [[-0.5 * base[1, 0], base[1, 0]], [-0.5 * base[1, 1], base[1, 1]]],
    ]
    entries[0][0][0] += 0.05
    doc = {"rows": 2, "cols": 2, "entries": entries, "structure": "full"}
    path = tmp_path / "near.json"
    path.write_text(json.dumps(doc))
    report, code = run_cli(capsys, ["mccoy", str(path), "--rank-drop", "2"])
    assert code == 0
    assert report["distance"] < 0.1
    assert len(report["invariant_factor"]) in (2, 3)


def test_mask_file_structure(capsys, tmp_path):
    doc = {
        "rows": 2,
        "cols": 2,
        "entries": [[[1.0, 1.0], [0.0]], [[0.0], [1.0, -1.0]]],
    }
    matrix_path = tmp_path / "m.json"
    matrix_path.write_text(json.dumps(doc))
    mask_path = tmp_path / "mask.json"
    mask_path.write_text(json.dumps({"mask": [[[True, False], [False]], [[False], [True, True]]]}))
    report, code = run_cli(capsys, ["check", str(matrix_path), "--structure", str(mask_path)])
    assert code == 0
    assert "is_trivial" in report


def test_selftest_command(capsys):
    report, code = run_cli(capsys, ["selftest", "--seed", "0"])
    assert code == 0
    assert report["passed"] == report["total"]


def test_snf_reversal_flag(capsys):
    report, code = run_cli(
        capsys,
        ["snf", str(FIXTURES / "unattainable_C.json"), "--deg-h", "2", "--reversal"],
    )
    assert code == 0
    assert report["distance"] <= 1e-8


def test_mccoy_linearize_flag(capsys, tmp_path):
    doc = {
        "rows": 2,
        "cols": 2,
        "entries": [
            [[0.9, -0.2, 1.0], [0.1]],
            [[0.2], [1.2, 0.3, 0.8]],
        ],
        "structure": "full",
    }
    path = tmp_path / "deg2.json"
    path.write_text(json.dumps(doc))
    on, code_on = run_cli(capsys, ["mccoy", str(path), "--rank-drop", "2", "--linearize", "true"])
    off, code_off = run_cli(capsys, ["mccoy", str(path), "--rank-drop", "2", "--linearize", "false"])
    assert code_on == 0 and code_off == 0
    assert on["distance"] == pytest.approx(off["distance"], abs=1e-6)


def test_exit_code_stalled(capsys, monkeypatch, tmp_path):
    from polysmith.lmsolve import LmTrace, Termination
    from polysmith.matpoly import MatPoly, Poly
    from polysmith.snf_opt import SnfReport

    stub = SnfReport(
        delta_a=MatPoly.zeros(2, 2, 1),
        distance=0.0,
        h=Poly([0.0, 1.0]),
        cofactors=MatPoly.zeros(2, 2, 0),
        iterations=1,
        final_grad_norm=1.0,
        omega=0j,
        invariant_structure=[],
        certified=False,
        trace=LmTrace(merits=[1.0], termination=Termination.STALLED),
    )
    monkeypatch.setattr(cli, "solve", lambda *a, **k: stub)
    doc = {"rows": 2, "cols": 2, "entries": [[[1.0, 1.0], [0.0]], [[0.0], [1.0, -1.0]]]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    _, code = run_cli(capsys, ["snf", str(path), "--deg-h", "1"])
    assert code == cli.EXIT_STALLED
