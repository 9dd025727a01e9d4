import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conescale import cli, encoding
from conescale.encoding import FeasibilityResult
from conescale.errors import ConvergenceError


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def square_files(tmp_path, capsys):
    code, _, _ = run(["polytope", "zero-one", "--d", 3, "--subset", "0,1,2,3", "--factorization",
                      "--out", tmp_path / "inst.json"], capsys)
    assert code == 0
    inst = json.loads((tmp_path / "inst.json").read_text())
    write(tmp_path / "fac.json", inst["factorization"])
    write(tmp_path / "cand.json", {"points": [[0, 0, 1], [0, 1, 1], [1, 0, 1], [1, 1, 1]]})
    return tmp_path


def test_pipeline_writes_sixteen_manifests(tmp_path, capsys):
    code, out, _ = run(["pipeline", "zero-one", "--d", 3, "--subset", "all", "--cone", "orthant-auto",
                        "--out-dir", tmp_path], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["instances"] == 16 and summary["all_exact"] and summary["distinct_encodings"] == 16
    manifests = sorted(tmp_path.glob("*.manifest.json"))
    assert len(manifests) == 16
    m = json.loads(manifests[5].read_text())
    (path, digest), = m["outputs"].items()
    assert json.loads(open(path).read())["exact"]
    assert m["options"]["kkt_tol"] == 1e-6 and m["options"]["rho_variant"] == "d+1"


def test_pipeline_threads_give_identical_output(tmp_path, capsys, monkeypatch):
    _, one, _ = run(["pipeline", "zero-one", "--subset", "1,6,15"], capsys)
    monkeypatch.setenv("CONESCALE_THREADS", "3")
    _, three, _ = run(["pipeline", "zero-one", "--subset", "1,6,15"], capsys)
    assert one == three


def test_normalize_interiority_failure_exits_2(tmp_path, capsys):
    fac = {"cone": {"blocks": [{"type": "orthant", "dim": 2}]}, "A": [[1, 0], [2, 0]], "B": [[1, 1]]}
    code, _, err = run(["normalize", "--factorization", write(tmp_path / "f.json", fac)], capsys)
    assert code == 2
    assert "cone(A)" in err


def test_normalize_is_deterministic(square_files, capsys):
    d = square_files
    fac = {"cone": {"blocks": [{"type": "soc", "dim": 3}, {"type": "psd", "side": 2}]},
           "A": [[0.1, 0.2, 1.0, 1.0, 0.0, 2.0], [0.5, 0.0, 1.0, 2.0, 0.1, 1.0]],
           "B": [[0.0, 0.3, 1.0, 1.0, 0.2, 1.0]]}
    write(d / "g.json", fac)
    for k in (1, 2):
        code, _, _ = run(["normalize", "--factorization", d / "g.json", "--out", d / f"c{k}.json",
                          "--manifest", d / f"m{k}.json"], capsys)
        assert code == 0
    assert (d / "c1.json").read_bytes() == (d / "c2.json").read_bytes()
    m1, m2 = (json.loads((d / f"m{k}.json").read_text()) for k in (1, 2))
    assert list(m1["outputs"].values()) == list(m2["outputs"].values())
    assert m1["options"]["kkt_tol"] == 1e-6 and "eps_zero" in m1["options"]
    cert = json.loads((d / "c1.json").read_text())
    assert max(cert["max_primal_norm_sq"], cert["max_dual_norm_sq"]) <= cert["theta"] * cert["delta"] * (1 + 1e-6)


def test_counterexample(capsys):
    code, out, _ = run(["counterexample", "--M", 10], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["delta"] == 0.0 and doc["certified"]
    assert doc["min_max_norm"] == pytest.approx(10 * math.sqrt(2), rel=1e-12)
    assert doc["grid_size"] == 4001


def test_malformed_json_exits_1(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"cone": [1,\n')
    code, _, err = run(["normalize", "--factorization", tmp_path / "bad.json"], capsys)
    assert code == 1 and "line 2" in err


def test_encode_and_reconstruct(square_files, capsys):
    d = square_files
    code, _, _ = run(["normalize", "--factorization", d / "fac.json", "--out", d / "cert.json"], capsys)
    # the slack matrix of the square has no zero column, so plain normalization applies
    assert code == 0
    scaled = json.loads((d / "cert.json").read_text())["scaled"]
    scaled["labels"] = json.loads((d / "fac.json").read_text())["labels"]
    write(d / "scaled.json", scaled)
    code, _, err = run(["encode", "--factorization", d / "scaled.json", "--M", 216, "--fc", 2.0,
                        "--instance", d / "inst.json", "--out", d / "enc.json"], capsys)
    assert code == 0, err
    code, out, _ = run(["reconstruct", "--encoded", d / "enc.json", "--candidates", d / "cand.json",
                        "--manifest", d / "m.json"], capsys)
    assert code == 0
    assert sorted(json.loads(out)["accepted"]) == [[0, 0, 1], [0, 1, 1], [1, 0, 1], [1, 1, 1]]
    opts = json.loads((d / "m.json").read_text())["options"]
    assert opts["accept_tol"] == pytest.approx(opts["halfwidth"] / 2)


def test_indeterminate_exits_4(square_files, capsys, monkeypatch):
    d = square_files
    run(["normalize", "--factorization", d / "fac.json", "--out", d / "cert.json"], capsys)
    scaled = json.loads((d / "cert.json").read_text())["scaled"]
    scaled["labels"] = json.loads((d / "fac.json").read_text())["labels"]
    write(d / "scaled.json", scaled)
    run(["encode", "--factorization", d / "scaled.json", "--M", 216, "--fc", 2.0, "--out", d / "enc.json"], capsys)
    monkeypatch.setattr(encoding, "feasibility_check",
                        lambda *a, **k: FeasibilityResult("indeterminate", 0.01, 0.0, None, "stub"))
    code, out, err = run(["reconstruct", "--encoded", d / "enc.json", "--candidates", d / "cand.json"], capsys)
    assert code == 4 and "indeterminate" in err
    assert all(c["status"] == "indeterminate" for c in json.loads(out)["candidates"])


def test_nonconvergence_exits_3(square_files, capsys, monkeypatch):
    def fail(*a, **k):
        raise ConvergenceError("iteration cap reached")

    monkeypatch.setattr(cli, "normalize_factorization", fail)
    code, _, err = run(["normalize", "--factorization", square_files / "fac.json"], capsys)
    assert code == 3 and "iteration cap" in err


def test_nt_scale(tmp_path, capsys):
    write(tmp_path / "cone.json", {"blocks": [{"type": "soc", "dim": 3}]})
    code, out, _ = run(["nt-scale", "--cone", tmp_path / "cone.json", "--a", "0.5,0.2,2", "--b=-1,0.3,3"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["relative_residual"] <= 1e-8
    code, _, _ = run(["nt-scale", "--cone", tmp_path / "cone.json", "--a", "1,0,1", "--b", "0,0,1"], capsys)
    assert code == 2


def test_recover_maps(tmp_path, capsys):
    rng = np.random.default_rng(0)
    G = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    A, B = rng.standard_normal((4, 3)), rng.standard_normal((3, 3))
    pairs = {"A": A.tolist(), "A_t": (A @ G.T).tolist(), "B": B.tolist(), "B_t": (B @ np.linalg.inv(G)).tolist()}
    code, out, _ = run(["recover-maps", "--pairs", write(tmp_path / "p.json", pairs)], capsys)
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["G"], G, atol=1e-10)


def test_net(capsys):
    code, out, _ = run(["net", "--n", 3, "--rho", 1, "--eps", 1 / 3, "--enumerate"], capsys)
    doc = json.loads(out)
    assert code == 0 and abs(doc["cardinality_bound"] - 1363.5) <= 0.1 and doc["enumerated_size"] == 179
    code, _, _ = run(["net", "--n", 3, "--rho", 1, "--eps", 0.5], capsys)
    assert code == 2


def test_bound(capsys):
    code, out, _ = run(["bound", "zero-one", "--d", 21, "--n", 100, "--fc", 10], capsys)
    assert code == 0 and json.loads(out)["ruled_out"] is True
    code, out, _ = run(["bound", "zero-one", "--d", 20, "--n", 100, "--fc", 10, "--rho-variant", "n+1"], capsys)
    assert json.loads(out)["ruled_out"] is False
    code, out, _ = run(["bound", "cyclic", "--d", 3, "--t", 100, "--n", 20, "--fc", 5], capsys)
    assert code == 0 and json.loads(out)["lhs_log2"] == 101


def test_polytope_cyclic(capsys):
    code, out, _ = run(["polytope", "cyclic", "--d", 3, "--t", 3, "--subset", "0,1,3"], capsys)
    assert json.loads(out)["F"] == [[-4, 1, 3], [-1, 1, 0], [3, -1, 0]]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "conescale", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "pipeline" in res.stdout
