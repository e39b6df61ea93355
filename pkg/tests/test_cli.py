import json
import subprocess
import sys

import numpy as np
import pytest

from hagedorn_kit.cli import main
from hagedorn_kit.errors import TruncationWarning
from hagedorn_kit.grid import GridFunction
from hagedorn_kit.hagedorn import packet_values
from hagedorn_kit.hermite import HermiteContext, hermite_fn_eval
from hagedorn_kit.sampling import make_rng, random_pair
from hagedorn_kit.symplectic import NormalizedPair


def write_pair(path, pair):
    path.write_text(pair.to_json())
    return str(path)


@pytest.fixture
def identity_file(tmp_path):
    return write_pair(tmp_path / "id.json", NormalizedPair(np.eye(1), 1j * np.eye(1)))


@pytest.fixture
def pair2_file(tmp_path):
    return write_pair(tmp_path / "p2.json", random_pair(make_rng(0, "cli"), 2, 0.5))


def run(*argv):
    return main([str(a) for a in argv])


def test_validate(tmp_path, identity_file):
    out = tmp_path / "r.json"
    assert run("validate", identity_file, "-o", out) == 0
    rep = json.loads(out.read_text())
    assert rep["valid"] is True
    assert all(v == 0.0 for v in rep["residuals"].values())

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"d": 1, "hbar": 1.0, "Q": {"re": [[1.0]], "im": [[0.0]]},
                               "P": {"re": [[1.0]], "im": [[0.0]]}}))
    assert run("validate", bad, "-o", out) == 2
    rep = json.loads(out.read_text())
    assert rep["valid"] is False and "Q*P - P*Q != 2iI" in rep["violation"]

    good = write_pair(tmp_path / "g.json", random_pair(make_rng(1, "val"), 3))
    assert run("validate", good, "-o", out) == 0
    assert max(json.loads(out.read_text())["residuals"].values()) < 1e-12


def test_validate_malformed(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    out = tmp_path / "r.json"
    assert run("validate", bad, "-o", out) == 2
    assert "malformed JSON" in json.loads(out.read_text())["violation"]
    assert run("validate", tmp_path / "missing.json", "-o", out) == 2


def test_validate_csv(tmp_path, identity_file):
    out = tmp_path / "r.csv"
    assert run("validate", identity_file, "--format", "csv", "-o", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "quantity,value" and lines[-1] == "valid,true"


def test_eval_identity_matches_hermite(tmp_path, identity_file):
    pts = tmp_path / "pts.csv"
    pts.write_text("-0.5\n0.0\n1.25\n")
    out = tmp_path / "t.csv"
    assert run("eval", identity_file, "--order", 2, "--points", pts, "--format", "csv", "-o", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,re_0,im_0,re_1,im_1,re_2,im_2"
    ctx = HermiteContext(1, 1.0, 2)
    for line, x in zip(lines[1:], (-0.5, 0.0, 1.25)):
        row = [float(v) for v in line.split(",")]
        for k in range(3):
            assert row[1 + 2 * k] == pytest.approx(float(hermite_fn_eval(ctx, (k,), [x])), abs=1e-14)
            assert row[2 + 2 * k] == 0.0


def test_eval_deterministic(tmp_path, pair2_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run("eval", pair2_file, "--order", 3, "--quadrature", 6, "-o", path) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("fmt,ext", [("json", "json"), ("csv", "csv")])
def test_eval_then_gram(tmp_path, pair2_file, fmt, ext):
    table = tmp_path / f"t.{ext}"
    assert run("eval", pair2_file, "--order", 4, "--quadrature", 8, "--format", fmt, "-o", table) == 0
    rep = tmp_path / "rep.json"
    assert run("verify", "--suite", "gram", "--table", table, "-o", rep) == 0
    assert json.loads(rep.read_text())["passed"] is True


def test_gram_detects_bad_table(tmp_path, pair2_file):
    table = tmp_path / "t.json"
    run("eval", pair2_file, "--order", 4, "--quadrature", 8, "-o", table)
    data = json.loads(table.read_text())
    data["weights"] = [2 * w for w in data["weights"]]
    table.write_text(json.dumps(data))
    assert run("verify", "--suite", "gram", "--table", table, "-o", tmp_path / "r.json") == 1


def test_eval_binary_grid(tmp_path, pair2_file):
    out = tmp_path / "g.bin"
    assert run("eval", pair2_file, "--order", 2, "--grid", "default:32", "--format", "bin",
               "--index", "1,1", "-o", out) == 0
    f = GridFunction.from_bytes(out.read_bytes())
    pair = NormalizedPair.from_json(open(pair2_file).read())
    ref = packet_values(pair, 2, f.spec.points())[(1, 1)]
    assert np.array_equal(f.values, ref)
    assert f.spec.counts == (32, 32) and f.hbar == 0.5


def test_eval_errors(tmp_path, pair2_file, identity_file):
    out = tmp_path / "o"
    assert run("eval", pair2_file, "--format", "bin", "--quadrature", 3, "-o", out) == 2
    assert run("eval", pair2_file, "-o", out) == 2
    assert run("eval", pair2_file, "--order", "-1", "--quadrature", 3, "-o", out) == 2
    assert run("eval", pair2_file, "--grid", "bogus", "-o", out) == 2
    pts = tmp_path / "pts.csv"
    pts.write_text("1,2,3\n")
    assert run("eval", pair2_file, "--points", pts, "-o", out) == 2
    assert run("eval", identity_file, "--order", 2, "--grid", "default:48", "-o", out) == 2


def test_strict_escalates_warnings(tmp_path, identity_file):
    out = tmp_path / "o.csv"
    # a box of half-width 2 truncates the packets
    with pytest.warns(TruncationWarning):
        assert run("eval", identity_file, "--grid", "2:16", "--format", "csv", "-o", out) == 0
    assert run("eval", identity_file, "--grid", "2:16", "--format", "csv", "--strict", "-o", out) == 1
    assert run("eval", identity_file, "--order", 6, "--quadrature", 2, "--strict", "-o", out) == 1


def test_verify_suites(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "--suite", "ladder", "--d", 2, "--trials", 100, "--seed", 7, "-o", out) == 0
    assert run("verify", "--suite", "uncertainty", "--d", 3, "-o", out) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and [c["name"] for c in rep["checks"]] == sorted(c["name"] for c in rep["checks"])
    assert run("verify", "--suite", "correspondence", "--d", 1, "--trials", 1, "-o", out) == 0
    rep = json.loads(out.read_text())
    assert all("signs" in c["info"] for c in rep["checks"] if c["name"].startswith("correspondence"))


def test_verify_errors(tmp_path):
    out = tmp_path / "v"
    assert run("verify", "--suite", "gram", "-o", out) == 2
    assert run("verify", "--suite", "ladder", "--trials", 0, "-o", out) == 2
    assert run("verify", "--suite", "nope", "-o", out) == 2
    assert run("verify", "--suite", "ladder", "--format", "bin", "-o", out) == 2


def test_verify_threads_deterministic(tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["verify", "--suite", "all", "--d", 1, "--trials", 1, "--seed", 3]
    assert run(*argv, "-o", a) == 0
    monkeypatch.setenv("HAGEDORN_KIT_THREADS", "4")
    assert run(*argv, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("HAGEDORN_KIT_THREADS", "zero")
    assert run(*argv, "-o", b) == 2


def test_uncertainty_command(tmp_path):
    s = np.sqrt(2.0)
    path = write_pair(tmp_path / "p.json", NormalizedPair([[s]], [[1j / s]], hbar=0.5))
    out = tmp_path / "u.json"
    assert run("uncertainty", path, "-o", out) == 0
    rep = json.loads(out.read_text())
    assert rep["theta"] == 0.0
    assert rep["axes"][0]["product"] == pytest.approx(0.25, abs=1e-12)
    assert run("uncertainty", path, "--format", "csv", "-o", out) == 0
    assert out.read_text().splitlines()[0] == "axis,lambda,delta_xi,delta_eta,product"


def test_genfun_command(tmp_path, pair2_file):
    out = tmp_path / "g.json"
    assert run("genfun", pair2_file, "--w", "0.1+0.05j,-0.1", "--order", 12, "-o", out) == 0
    rep = json.loads(out.read_text())
    for key in ("packet", "polynomial"):
        assert rep[key]["error"] < 1e-9
        # the bound covers truncation; the error also contains rounding
        assert rep[key]["error"] <= rep[key]["bound"] + 1e-14
    assert run("genfun", pair2_file, "--w", "0.1", "-o", out) == 2
    assert run("genfun", pair2_file, "--w", "abc,1", "-o", out) == 2


def test_module_entry_point(tmp_path, identity_file):
    res = subprocess.run([sys.executable, "-m", "hagedorn_kit", "validate", identity_file, "--format", "csv"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1] == "valid,true"
