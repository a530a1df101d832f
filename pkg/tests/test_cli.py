import json

import pytest

from cnotsynth.circuit import load as load_circuit, verify_solves
from cnotsynth.cli import dispatch
from cnotsynth.gf2core import load as load_matrix, save as save_matrix
from cnotsynth.generators import gen_random_cnots
from cnotsynth.gf2core import make_rng
from cnotsynth.ppo import save_checkpoint


@pytest.fixture
def mfile(tmp_path):
    path = tmp_path / "m.txt"
    save_matrix(gen_random_cnots(6, 20, make_rng(0)), path)
    return path


@pytest.fixture
def policy_file(tmp_path, policy4):
    path = tmp_path / "p4.ckpt"
    save_checkpoint(policy4.params.snap_float32(), path)
    return path


def test_synth_then_verify(tmp_path, mfile, capsys):
    out = tmp_path / "c.txt"
    assert dispatch(["synth", "--method", "pmh", "--in", str(mfile), "--out", str(out)]) == 0
    assert dispatch(["verify", str(mfile), str(out)]) == 0
    summary = json.loads((tmp_path / "c.txt.json").read_text())
    assert summary["verified"] and summary["method"] == "pmh"
    assert summary["cnot_count"] == len(load_circuit(out))


def test_oracle_swap(tmp_path, capsys):
    path = tmp_path / "swap2.txt"
    path.write_text("2\n01\n10\n")
    assert dispatch(["oracle", "--in", str(path)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "3"


@pytest.mark.parametrize("method", ["rl", "pmh-star", "exact"])
def test_synth_methods(tmp_path, policy_file, method):
    for n in (3, 4, 5, 7):
        m = gen_random_cnots(n, n * n, make_rng(n))
        mpath = tmp_path / f"m{n}.txt"
        save_matrix(m, mpath)
        out = tmp_path / f"{method}{n}.txt"
        argv = ["synth", "--method", method, "--in", str(mpath), "--out", str(out), "--policy", str(policy_file),
                "--runs", "10"]
        code = dispatch(argv)
        if method == "exact" and n > 5 or method == "pmh-star" and n <= 4:
            assert code == 1
            assert not out.exists()
            continue
        assert code == 0
        assert verify_solves(m, load_circuit(out))


def test_verify_failure_exit_code(tmp_path, mfile):
    bad = tmp_path / "bad.txt"
    bad.write_text("n=6\nCNOT 0 1\n")
    assert dispatch(["verify", str(mfile), str(bad)]) == 2


def test_usage_errors(tmp_path, mfile, capsys):
    assert dispatch([]) == 1
    assert dispatch(["frobnicate"]) == 1
    assert dispatch(["synth", "--in", str(mfile)]) == 1
    assert dispatch(["synth", "--in", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "x")]) == 1
    assert dispatch(["synth", "--method", "rl", "--in", str(mfile), "--out", str(tmp_path / "x")]) == 1
    assert dispatch(["bench", "--out", str(tmp_path / "b"), "--sizes", "1"]) == 1
    assert dispatch(["gen", "--out", str(tmp_path / "g"), "--settings", "spicy"]) == 1
    (tmp_path / "junk.txt").write_text("3\n101\n")
    assert dispatch(["oracle", "--in", str(tmp_path / "junk.txt")]) == 1
    assert "error" in capsys.readouterr().err


def test_gen_manifest(tmp_path):
    assert dispatch(["gen", "--out", str(tmp_path / "s"), "--settings", "rare,overcooked", "--sizes", "3-4",
                     "--count", "5", "--seed", "2"]) == 0
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert len(manifest["suites"]) == 4
    entry = manifest["suites"][-1]
    assert (entry["setting"], entry["n"], entry["budget"]) == ("overcooked", 4, 16)
    for f in entry["files"]:
        assert load_matrix(tmp_path / "s" / f).n == 4


def test_train_and_bench_smoke(tmp_path):
    sched = tmp_path / "sched.json"
    sched.write_text(json.dumps([{"start": 0, "end": 20, "class": "permutation", "budget_expr": None},
                                 {"start": 20, "end": 40, "class": "random_cnots", "budget_expr": "n"}]))
    ckpt = tmp_path / "p.ckpt"
    assert dispatch(["train", "--m", "3", "--schedule", str(sched), "--seed", "1", "--out", str(ckpt)]) == 0
    assert ckpt.exists() and (tmp_path / "p.ckpt.log.json").exists()
    out = tmp_path / "bench"
    assert dispatch(["bench", "--out", str(out), "--policy", str(ckpt), "--sizes", "2-4", "--suite-size", "3",
                     "--runs", "4"]) == 0
    for name in ("records.csv", "summary.csv", "ablation.csv", "table.txt", "plotdata/lines.csv",
                 "plotdata/distributions.csv"):
        assert (out / name).exists()
