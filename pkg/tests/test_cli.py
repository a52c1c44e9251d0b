import json

import pytest

from fueterlab.cli import main
from fueterlab.reports import read_csv


def run(*argv):
    return main([str(a) for a in argv])


def test_spectrum_outputs(tmp_path, capsys):
    out = tmp_path / "s3"
    assert run("spectrum", "--frame", "standard_s3", "--jmax", "2", "--out", out) == 0
    text = capsys.readouterr().out
    assert "kernel_dimension 4" in text and "verdict Regular" in text and "lambda_spinc 1.5" in text
    comments, cols, rows = read_csv(out / "eigenvalues.csv")
    assert cols == ["block", "index", "eigenvalue", "weight"]
    assert any(c.startswith("quantity:") for c in comments)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and "eigenvalues.csv" in manifest["artifacts"]
    assert len(manifest["input_sha256"]) == 64


def test_singular_verdict(tmp_path, capsys):
    assert run("spectrum", "--frame", "singular_s3", "--out", tmp_path / "x") == 0
    assert "verdict Singular" in capsys.readouterr().out
    # below j = 3/2 the tail bound for this frame is not yet increasing
    assert run("spectrum", "--frame", "singular_s3", "--jmax", "1", "--out", tmp_path / "y") == 2


def test_frame_from_file(tmp_path, capsys):
    frame = tmp_path / "frame.json"
    frame.write_text(json.dumps({"manifold": "Torus3", "U": [2, 0, 0, 0, 1, 0, 0, 0, 1]}))
    assert run("spectrum", "--frame", frame, "--kmax", "2", "--out", tmp_path / "t") == 0
    assert "kernel_dimension 4" in capsys.readouterr().out


def test_input_errors(tmp_path):
    assert run("spectrum", "--out", tmp_path / "a") == 1
    assert run("spectrum", "--frame", "no_such_frame", "--out", tmp_path / "b") == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"manifold": "Torus3", "U": [1, 0, 0, 0, 1, 0, 0, 0, -1]}))
    assert run("spectrum", "--frame", bad, "--out", tmp_path / "c") == 1
    assert run("verify", "nonsense", "--out", tmp_path / "d") == 1
    assert run("frobnicate") == 1


def test_refuses_to_overwrite(tmp_path):
    out = tmp_path / "o"
    assert run("verify", "duality", "--out", out) == 0
    assert run("verify", "duality", "--out", out) == 1
    assert run("verify", "duality", "--out", out, "--force") == 0


def test_uncertified_truncation_exit_code(tmp_path):
    frame = json.dumps({"manifold": "Torus3", "U": [1, 0, 0, 0, 1, 0, 0, 0, 0.001]})
    assert run("spectrum", "--frame", frame, "--kmax", "1", "--tol", "0.01", "--out", tmp_path / "u") == 2


def test_model_paths(tmp_path, capsys):
    # D(s) = diag(s, -s): one curve up, one down, signature 0
    model = {"kind": "polynomial", "coeffs": [[[0, 0], [0, 0]], [[1, 0], [0, -1]]]}
    assert run("specflow", "--path", json.dumps(model), "--grid", "20", "--out", tmp_path / "m") == 0
    assert "flow 0" in capsys.readouterr().out
    # D(s) = diag(s^3, 1) crosses with a vanishing crossing form
    cubic = {"kind": "polynomial", "coeffs": [[[0, 0], [0, 1]], [[0, 0], [0, 0]], [[0, 0], [0, 0]], [[1, 0], [0, 0]]]}
    assert run("specflow", "--path", json.dumps(cubic), "--grid", "21", "--out", tmp_path / "c") == 3
    # a path that starts on the singular frame is an input error
    path = json.dumps({"kind": "constant", "frame": "singular_s3", "s_range": [-0.1, 0.1]})
    assert run("specflow", "--path", path, "--jmax", "0.5", "--grid", "11", "--out", tmp_path / "s") == 1


def test_degenerate_critical_point_exit_code(tmp_path):
    problem = json.dumps({"hamiltonian": {"zero": True}, "multistart": 0})
    assert run("floer", "--problem", problem, "--out", tmp_path / "z") == 4


def test_specflow_and_reversal(tmp_path, capsys):
    assert run("specflow", "--path", "s3_catalog", "--jmax", "0.5", "--out", tmp_path / "f") == 0
    assert "flow -4" in capsys.readouterr().out
    assert run("specflow", "--path", "s3_catalog", "--jmax", "0.5", "--reverse", "--out", tmp_path / "r") == 0
    assert "flow 4" in capsys.readouterr().out
    report = json.loads((tmp_path / "f" / "crossings.json").read_text())
    assert report["flow"] == -4 and len(report["crossings"]) == 1
    assert list((tmp_path / "f").glob("*.svg"))


@pytest.mark.parametrize("identity", ["energy", "dd2", "isoperimetric", "s1s2", "duality", "divergence"])
def test_verify_identities(identity, tmp_path, capsys):
    assert run("verify", identity, "--samples", "2", "--out", tmp_path / identity) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_failure_exit_code(tmp_path):
    assert run("verify", "energy", "--samples", "1", "--tol", "0", "--out", tmp_path / "v") == 5


def test_ample_modes(tmp_path, capsys):
    assert run("ample", "--mode", "equivalence", "--samples", "50", "--out", tmp_path / "e") == 0
    assert "passes 50/50" in capsys.readouterr().out
    assert run("ample", "--mode", "decompose", "--samples", "5", "--out", tmp_path / "d") == 0
    _, _, rows = read_csv(tmp_path / "d" / "decompose.csv")
    assert {r[-1] for r in rows} == {"ok", "empty_intersection"}


def test_rerun_reproduces(tmp_path, monkeypatch):
    a = tmp_path / "a"
    assert run("spectrum", "--frame", "product_s1s2", "--lmax", "6", "--out", a) == 0
    monkeypatch.setenv("FUETERLAB_THREADS", "3")
    b = tmp_path / "b"
    assert run("rerun", a / "manifest.json", "--out", b) == 0
    assert read_csv(a / "eigenvalues.csv") == read_csv(b / "eigenvalues.csv")
    assert json.loads((b / "manifest.json").read_text())["threads"] == "3"
