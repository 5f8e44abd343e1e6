import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from hausdorff_symbol.cli import run
from hausdorff_symbol.fixtures import fixture_text


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm_json(capsys, tmp_path):
    path = tmp_path / "cesaro-1-1.json"
    path.write_text(fixture_text("cesaro-1-1"))
    code, out, _ = _run(capsys, "norm", "--spec", str(path))
    assert code == 0
    doc = json.loads(out)
    assert doc["norm"] == pytest.approx(2.0, abs=1e-6)
    assert doc["bound"] == pytest.approx(2.0, abs=1e-8)
    assert abs(doc["argmax_s"][0]) < 0.04


def test_norm_csv_reports_distance_from_one(capsys):
    code, out, _ = _run(capsys, "norm", "--spec", "qcesaro-0.25", "--format", "csv")
    assert code == 0
    rows = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
    assert float(rows["norm"]) == pytest.approx(1.5, abs=1e-9)
    assert float(rows["sup_distance_from_one"]) == pytest.approx(0.5, abs=1e-9)


def test_spectrum_csv_circle(capsys):
    code, out, _ = _run(capsys, "spectrum", "--spec", "qcesaro-0.25", "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "s_1,chi,re,im,far"
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    lam = data[:, 2] + 1j * data[:, 3]
    assert np.max(np.abs(np.abs(lam - 1) - 0.5)) <= 1e-8


def test_symbol_csv(capsys, tmp_path):
    out_path = tmp_path / "sym.csv"
    code, out, _ = _run(capsys, "symbol", "--spec", "reflection", "--format", "csv", "--s-count", "5", "--far", "", "-o", str(out_path))
    assert code == 0 and out == ""
    lines = out_path.read_text().splitlines()
    assert lines[0] == "s_1,re_c0,im_c0,re_c1,im_c1"
    assert len(lines) == 6
    assert lines[1].split(",")[1:] == ["0.0", "0.0", "1.0", "0.0"]


def test_classify_json(capsys):
    code, out, _ = _run(capsys, "classify", "--spec", "reflection", "--s-count", "11")
    doc = json.loads(out)
    assert code == 0
    assert doc["self_adjoint"]["holds"] and doc["unitary"]["holds"]
    assert not doc["positive"]["holds"]


def test_apply_rejects_inline_json(capsys):
    fn = '{"n": 1, "octants": {"0": {"expr": "1", "support": [[-11, 0]]}}}'
    code, out, _ = _run(capsys, "apply", "--spec", "cesaro-1-1", "--function", fn, "--x", "0.05:0.95:10")
    # inline JSON is not a path or a fixture name
    assert code == 1


def test_apply_with_function_file(capsys, tmp_path):
    fn = tmp_path / "box.json"
    fn.write_text('{"n": 1, "octants": {"0": {"expr": "1", "support": [[-11, 0]]}}}')
    code, out, _ = _run(capsys, "apply", "--spec", "cesaro-1-1", "--function", str(fn), "--x", "0.05:0.95:10", "--format", "csv")
    assert code == 0
    data = np.array([[float(v) for v in line.split(",")] for line in out.strip().splitlines()[1:]])
    assert np.max(np.abs(data[:, 1] + np.log(data[:, 0]))) <= 1e-4


def test_verify_reflection(capsys):
    code, out, err = _run(capsys, "verify", "--spec", "reflection")
    assert code == 0
    doc = json.loads(out)
    names = {c["name"] for c in doc["checks"]}
    assert {"plancherel", "diagonalization", "adjointness", "composition", "inverse-roundtrip", "norm-bound"} <= names
    assert all(c["passed"] for c in doc["checks"])
    assert err.count("PASS") == len(doc["checks"])
    assert "threshold=" in err


def test_probe_compactness(capsys):
    code, out, _ = _run(capsys, "probe-compactness", "--spec", "reflection", "--sizes", "8,16", "--threshold", "0.9")
    assert code == 0
    assert json.loads(out)["counts"] == [8, 16]


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "--spec", "no-such-file.json"],
        ["bogus", "--spec", "reflection"],
        ["norm"],
        ["probe-compactness", "--spec", "reflection", "--sizes", "a,b"],
        ["apply", "--spec", "cesaro-1-1", "--function", "fn-power-1e", "--x", "nonsense"],
    ],
)
def test_input_errors(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 1


def test_bad_spec_reports_location(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "n": 1,\n "measure": {"type": "atoms", "points": [[1, 1]]},\n "kernel": "1+", "eigenvalues": ["2"]}')
    code, _, err = _run(capsys, "norm", "--spec", str(bad))
    assert code == 1
    assert "error:" in err and "kernel" in err


def test_output_is_deterministic(capsys):
    _, a, _ = _run(capsys, "spectrum", "--spec", "qcesaro-neg0.25", "--format", "csv", "--s-count", "257")
    _, b, _ = _run(capsys, "spectrum", "--spec", "qcesaro-neg0.25", "--format", "csv", "--s-count", "257")
    assert a == b and len(a) > 1000


def test_plot_written(capsys, tmp_path):
    pytest.importorskip("matplotlib")
    png = tmp_path / "spec.png"
    code, _, _ = _run(capsys, "spectrum", "--spec", "qcesaro-0.25", "--s-count", "129", "--plot", str(png))
    assert code == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_console_script():
    exe = shutil.which("hausdorff-symbol")
    cmd = [exe] if exe else [sys.executable, "-m", "hausdorff_symbol.cli"]
    res = subprocess.run(cmd + ["norm", "--spec", "reflection", "--s-count", "5"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["norm"] == 1.0
