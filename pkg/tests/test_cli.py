import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bayestree import _backend
from bayestree.cli import main


def run(*argv, stdin=None, monkeypatch=None):
    out = io.StringIO()
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def data_file(tmp_path):
    def make(values):
        p = tmp_path / f"d{len(list(tmp_path.iterdir()))}.txt"
        p.write_text("".join(f"{v!r}\n" for v in values))
        return str(p)
    return make


def test_evidence_empty(data_file):
    code, out = run("evidence", "--data", data_file([]))
    rep = json.loads(out)
    assert code == 0
    assert rep["log_evidence"] == 0.0
    assert rep["dim_dist"][0] == 0.5 and len(rep["dim_dist"]) == 16
    assert rep["divergent"] is False and rep["divergence_class"] == []
    assert set(rep) == {"log_evidence", "split_prob_root", "height_at_x", "avg_height", "dim_dist",
                        "dim_tail", "recursion_count", "divergent", "divergence_class"}


def test_evidence_double_point(data_file):
    code, out = run("evidence", "--data", data_file([0.5, 0.5]), "--x", "0.5", "--dim-max", "4")
    rep = json.loads(out)
    assert code == 0
    assert rep["log_evidence"] == pytest.approx(math.log(1.5), rel=1e-12)
    assert rep["split_prob_root"] == pytest.approx(2 / 3)
    assert rep["height_at_x"] == pytest.approx(2.0)


def test_evidence_quadruple_point_exit_2(data_file):
    code, out = run("evidence", "--data", data_file([0.3] * 4), "--x", "0.3")
    rep = json.loads(out)
    assert code == 2
    assert rep["divergent"] is True
    assert rep["log_evidence"]["divergent"] is True
    assert isinstance(rep["log_evidence"]["scaled_log"], float)
    assert rep["divergence_class"] == [[0.3, 4]]
    assert rep["height_at_x"] == {"divergent": True, "scaled_log": None}


def test_evidence_csv_divergent(data_file):
    code, out = run("evidence", "--data", data_file([0.3] * 4), "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 2 and rows[0]["log_evidence"] == "inf" and rows[0]["divergent"] == "true"
    assert rows[0]["divergence_class"] == "0.3:4"


def test_stdin_input(monkeypatch):
    code, out = run("evidence", "--data", "-", stdin="0.5\n0.5\n", monkeypatch=monkeypatch)
    assert code == 0 and json.loads(out)["log_evidence"] == pytest.approx(math.log(1.5))


def test_density_prior(data_file):
    code, out = run("density", "--data", data_file([]), "--grid", "50", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 50
    assert all(float(r["density"]) == pytest.approx(1.0) for r in rows)
    assert all(float(r["variance"]) == pytest.approx(0.5) for r in rows)
    assert float(rows[0]["x"]) == 0.01


def test_density_rows_match_grid():
    code, out = run("density", "--dist", "Linear", "--n", "200", "--grid", "128")
    rep = json.loads(out)
    assert code == 0 and len(rep["rows"]) == 128 and rep["grid"] == 128


def test_density_divergent_row(data_file):
    # a grid point sitting on a triple point
    code, out = run("density", "--data", data_file([0.125] * 3), "--grid", "4", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 2
    assert rows[0]["density"] == "inf" and rows[0]["variance"] == "inf"
    assert rows[1]["density"] != "inf"


def test_moments_and_cdf_prior(data_file):
    path = data_file([])
    code, out = run("moments", "--data", path, "--power", "1", "--power", "2")
    rows = json.loads(out)["rows"]
    assert code == 0 and rows[0]["moment"] == pytest.approx(0.5) and rows[1]["moment"] == pytest.approx(1 / 3)
    code, out = run("cdf", "--data", path, "--at", "0.25")
    assert json.loads(out)["rows"][0]["cdf"] == pytest.approx(0.25)
    code, out = run("cdf", "--data", path, "--grid", "10")
    assert len(json.loads(out)["rows"]) == 10


def test_skeleton_formats(data_file):
    path = data_file([0.1, 0.1, 0.12, 0.7])
    code, text = run("skeleton", "--data", path, "--max-depth", "2")
    assert code == 0 and text.startswith("split [0, 1) n=4")
    assert "truncated" in text
    code, js = run("skeleton", "--data", path, "--format", "json", "--max-depth", "5")
    tree = json.loads(js)
    assert tree["n"] == 4 and tree["kind"] == "split" and "g" in tree
    code, out = run("skeleton", "--data", path, "--format", "csv", "--max-depth", "5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["address"] == "" and rows[0]["n"] == "4"


def test_sample_roundtrip(tmp_path):
    p = tmp_path / "s.txt"
    code, _ = run("sample", "--dist", "Beta36", "--n", "100", "--seed", "9", "--out", str(p))
    assert code == 0
    vals = np.loadtxt(p)
    assert vals.shape == (100,) and np.all((vals >= 0) & (vals < 1))
    code, out = run("sample", "--dist", "Beta36", "--n", "100", "--seed", "9")
    assert out == p.read_text()
    code, a = run("evidence", "--data", str(p))
    code, b = run("evidence", "--dist", "Beta36", "--n", "100", "--seed", "9")
    assert a == b


def test_bench_small():
    code, out = run("bench", "--n-list", "0,1000,2000", "--repeat", "1")
    rows = json.loads(out)["rows"]
    assert code == 0 and rows[0]["recursion_count"] == 1
    assert rows[2]["count_ratio"] == pytest.approx(rows[2]["recursion_count"] / rows[1]["recursion_count"])
    assert rows[0]["backend"] == _backend.BACKEND


@pytest.mark.parametrize("argv", [
    ["evidence"],
    ["evidence", "--dist", "Linear"],
    ["evidence", "--dist", "Nope", "--n", "3"],
    ["evidence", "--data", "x.txt", "--dist", "Linear", "--n", "3"],
    ["evidence", "--dist", "Linear", "--n", "3", "--s", "1.0"],
    ["evidence", "--dist", "Linear", "--n", "3", "--alpha", "0"],
    ["evidence", "--dist", "Linear", "--n", "3", "--dim-max", "0"],
    ["evidence", "--dist", "Linear", "--n", "3", "--min-depth", "-1"],
    ["evidence", "--dist", "Linear", "--n", "3", "--x", "1.5"],
    ["cdf", "--dist", "Linear", "--n", "3", "--at", "1.0"],
    ["moments", "--dist", "Linear", "--n", "3", "--power", "0"],
    ["density", "--dist", "Linear", "--n", "3", "--grid", "0"],
    ["evidence", "--data", "/nonexistent/file"],
    ["frobnicate"],
    ["skeleton", "--dist", "Linear", "--n", "3", "--format", "yaml"],
])
def test_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        code = main(argv, out=io.StringIO())
        raise SystemExit(code)
    assert info.value.code == 1


def test_bad_data_line(data_file, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0.2\nhello\n")
    assert run("evidence", "--data", str(p))[0] == 1
    p.write_text("0.2\n1.5\n")
    assert run("evidence", "--data", str(p))[0] == 1


def test_compactify(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("2\n2\ninf\n")
    q = tmp_path / "q.txt"
    q.write_text("0.5\n0.5\n0\n")
    code, out = run("evidence", "--data", str(p), "--compactify", "reciprocal")
    assert code == 0 and out == run("evidence", "--data", str(q))[1]
    p.write_text("-3\n0\n12.5\n")
    assert run("evidence", "--data", str(p), "--compactify", "rational")[0] == 0
    p.write_text("0.5\n")
    assert run("evidence", "--data", str(p), "--compactify", "reciprocal")[0] == 1


def test_depth_cap_env(data_file, monkeypatch):
    monkeypatch.setenv("BAYESTREE_DEPTH_CAP", "10")
    assert run("evidence", "--data", data_file([0.1, 0.1 + 1e-9]))[0] == 1


@pytest.mark.parametrize("cmd", [
    ["evidence", "--x", "0.3"],
    ["density", "--grid", "64"],
    ["moments", "--power", "1", "--power", "3"],
    ["cdf", "--grid", "32"],
])
def test_min_depth_hook(cmd):
    base = [*cmd, "--dist", "Beta36", "--n", "300", "--seed", "4"]

    def load(m):
        rep = json.loads(run(*base, "--min-depth", str(m))[1])
        rep.pop("recursion_count", None)
        return rep

    ref = load(0)
    for m in (2, 5):
        _assert_close(load(m), ref)


def _assert_close(a, b):
    if isinstance(a, dict):
        assert a.keys() == b.keys()
        for k in a:
            _assert_close(a[k], b[k])
    elif isinstance(a, list):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _assert_close(x, y)
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
    else:
        assert a == b


@pytest.mark.parametrize("cmd", ["evidence", "density", "skeleton", "moments"])
def test_output_deterministic(cmd):
    argv = [cmd, "--dist", "JumpThird", "--n", "500", "--seed", "77", "--grid", "20"]
    assert run(*argv)[1] == run(*argv)[1]


@pytest.mark.skipif(_backend.compiled_kernel is None, reason="compiled kernel not built")
def test_backends_give_same_report():
    argv = ["evidence", "--dist", "Linear", "--n", "2000", "--x", "0.4"]
    a = json.loads(run(*argv, "--backend", "compiled")[1])
    b = json.loads(run(*argv, "--backend", "python")[1])
    _assert_close(a, b)
    assert _backend.kernel is _backend.get_kernel()


def test_module_entry_point(tmp_path):
    p = tmp_path / "q.txt"
    p.write_text("0.3\n0.3\n0.3\n0.3\n")
    proc = subprocess.run([sys.executable, "-m", "bayestree", "evidence", "--data", str(p)],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["divergent"] is True
