import io
import math
import random

import pytest

from cnotsynth import bench
from cnotsynth import generators as gen
from cnotsynth.bench import (
    AblationRow, BenchConfig, BenchRecord, ablation_pmh_star, emit_plot_data, mean_std, parse_records,
    read_csv, render_table, rl_pipeline, run_benchmark, summarize, write_records,
)
from cnotsynth.circuit import verify_solves
from cnotsynth.gf2core import make_rng
from cnotsynth.ppo import init_params, zero_params
from cnotsynth.resize import gaussian_stripe


def rec(method, setting, n, mid, count, **kw):
    return BenchRecord(method, setting, n, mid, count, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(suite_size=0)
    with pytest.raises(ValueError):
        BenchConfig(sizes=(1,))
    with pytest.raises(ValueError):
        BenchConfig(sizes=(65,))
    with pytest.raises(ValueError):
        BenchConfig(settings=("spicy",))
    with pytest.raises(ValueError):
        BenchConfig(methods=("magic",))


def test_pmh_only_suite():
    records = run_benchmark(BenchConfig(sizes=(3,), settings=("rare",), methods=("pmh",)))
    assert len(records) == 100 and all(r.verified for r in records)


def test_rl_methods_need_policy():
    with pytest.raises(ValueError):
        run_benchmark(BenchConfig(sizes=(3,), methods=("rl",)))


def test_pipeline_routes_and_accounting():
    params = init_params(16, 12, hidden=(16, 16), seed=0)
    rng = make_rng(4)
    for n in range(2, 10):
        m = gen.gen_random_cnots(n, n * n, rng)
        res = rl_pipeline(params, m, runs=5, seed=1)
        route = res.extra["route"]
        assert route == ("embed" if n < 4 else "direct" if n == 4 else "stripe")
        if route == "embed":
            assert res.circuit.n == 4
        else:
            assert verify_solves(m, res.circuit)
        if route == "stripe":
            red = gaussian_stripe(m, 4)
            assert res.extra["prefix_count"] == red.count
            gates = res.circuit.gates
            assert gates[:len(red.prefix)] == red.prefix.gates
            assert gates[len(gates) - len(red.suffix):] == red.suffix.gates
            block = gates[len(red.prefix):len(gates) - len(red.suffix)]
            assert res.count == red.count + len(block)
            assert all(c >= red.k and t >= red.k for c, t in block)


def test_fallback_is_flagged():
    params = zero_params(16, 12)
    m = gen.gen_random_cnots(4, 16, make_rng(0))
    res = rl_pipeline(params, m, runs=2, max_steps=1)
    assert res.extra["fallback"] and verify_solves(m, res.circuit)


def test_benchmark_with_policy_is_deterministic(policy4):
    cfg = BenchConfig(sizes=(3, 4, 6), suite_size=8, runs_per_matrix=10, methods=("pmh", "rl", "pmh_star", "exact"))
    a = run_benchmark(cfg, policy4.params)
    b = run_benchmark(cfg, policy4.params)
    ba, bb = io.StringIO(), io.StringIO()
    write_records(a, ba)
    write_records(b, bb)
    assert ba.getvalue() == bb.getvalue()
    methods = {(r.method, r.n) for r in a}
    assert ("pmh_star", 6) in methods and ("pmh_star", 4) not in methods
    assert ("exact", 4) in methods and ("exact", 6) not in methods
    opt = {(r.setting, r.n, r.matrix_id): r.cnot_count for r in a if r.method == "exact"}
    for r in a:
        if (r.setting, r.n, r.matrix_id) in opt and r.method == "pmh":
            assert r.cnot_count >= opt[(r.setting, r.n, r.matrix_id)]


def test_parallel_matches_serial(policy4):
    cfg = BenchConfig(sizes=(3, 5), settings=("rare", "medium"), suite_size=4, runs_per_matrix=5)
    texts = []
    for jobs in (2, 1):
        buf = io.StringIO()
        write_records(run_benchmark(cfg, policy4.params, jobs=jobs), buf)
        texts.append(buf.getvalue())
    assert texts[0] == texts[1]


def test_summarize_examples():
    s = summarize([rec("pmh", "rare", 5, i, 7) for i in range(100)])
    assert len(s) == 1 and s[0].mean == 7 and s[0].std == 0 and s[0].count == 100
    s = summarize([rec("pmh", "rare", 5, 0, 1), rec("pmh", "rare", 5, 1, 3)])
    assert s[0].mean == 2 and s[0].std == pytest.approx(math.sqrt(2))
    assert mean_std([4]) == (4, 0.0)
    with pytest.raises(ValueError):
        mean_std([])
    with pytest.raises(bench.VerificationError):
        summarize([rec("pmh", "rare", 5, 0, 1, verified=False)])


def test_summarize_fallback_columns():
    rows = summarize([rec("rl", "rare", 9, 0, 4), rec("rl", "rare", 9, 1, 10, fallback=True)])
    assert rows[0].fallbacks == 1 and rows[0].mean == 7 and rows[0].mean_no_fallback == 4


def test_summarize_permutation_invariant():
    rng = random.Random(0)
    records = [rec(m, s, n, i, rng.randint(0, 50)) for m in ("pmh", "rl") for s in gen.SETTINGS
               for n in (3, 4) for i in range(10)]
    shuffled = records[:]
    rng.shuffle(shuffled)
    assert summarize(records) == summarize(shuffled)


def test_render_table_column_order():
    records = [rec(m, s, 4, 0, 3) for s in gen.SETTINGS for m in ("pmh", "rl")]
    lines = render_table(summarize(records)).splitlines()
    assert lines[0].split() == ["Setting", "Rare", "Rare", "Medium", "Medium", "Overcooked", "Overcooked"]
    assert lines[1].split() == ["Size", "RL", "PMH", "RL", "PMH", "RL", "PMH"]
    assert lines[2].split()[0] == "4"


def test_ablation_arithmetic():
    records = [rec("rl", "medium", 9, 0, 30), rec("rl", "medium", 9, 1, 34),
               rec("pmh_star", "medium", 9, 0, 33), rec("pmh_star", "medium", 9, 1, 36),
               rec("rl", "rare", 9, 0, 5), rec("pmh_star", "rare", 9, 0, 5)]
    rows = ablation_pmh_star(records)
    assert rows == [AblationRow("rare", 9, 5.0, 5.0), AblationRow("medium", 9, 32.0, 34.5)]
    assert rows[0].difference == 0.0
    assert rows[1].difference == 2.5  # positive: the policy pipeline saved gates
    with pytest.raises(ValueError):
        ablation_pmh_star([rec("pmh_star", "rare", 9, 0, 5)])


def test_ablation_header_documents_sign(tmp_path):
    bench.write_ablation([AblationRow("rare", 9, 5.0, 6.0)], tmp_path / "a.csv")
    text = (tmp_path / "a.csv").read_text()
    assert "positive means the policy pipeline saves gates" in text.splitlines()[0]
    assert read_csv(tmp_path / "a.csv")[0]["difference"] == "1.000000"


def test_plot_data(tmp_path):
    records = [rec(m, "rare", n, i, i + n) for m in ("pmh", "rl") for n in (9, 10) for i in range(7)]
    rows = summarize(records)
    lines, dists = emit_plot_data(rows, records, tmp_path)
    parsed = read_csv(lines)
    assert len(parsed) == len(rows) == 4
    for row, got in zip(rows, parsed):
        assert (got["method"], got["setting"], int(got["n"])) == (row.method, row.setting, row.n)
        assert float(got["mean"]) == pytest.approx(row.mean, abs=1e-6)
        assert float(got["std"]) == pytest.approx(row.std, abs=1e-6)
    drows = read_csv(dists)
    for key in {(r.method, r.n) for r in records}:
        assert sum(1 for d in drows if (d["method"], int(d["n"])) == key) == 7
    single = summarize([rec("pmh", "rare", 3, 0, 1)])
    one, _ = emit_plot_data(single, [], tmp_path / "one")
    assert len(read_csv(one)) == 1


def test_records_csv_roundtrip(tmp_path):
    records = [rec("rl", "rare", 3, 0, 2, route="embed", padding_gates=1, confined_count=None),
               rec("rl", "overcooked", 12, 1, 80, prefix_count=30, route="stripe", fallback=True)]
    write_records(records, tmp_path / "r.csv")
    assert parse_records(tmp_path / "r.csv") == records
    assert (tmp_path / "r.csv").read_text().startswith("# cnotsynth-bench v1")


def test_write_outputs(tmp_path, policy4):
    cfg = BenchConfig(sizes=(3, 5), suite_size=3, runs_per_matrix=5)
    paths = bench.write_outputs(run_benchmark(cfg, policy4.params), tmp_path)
    for key in ("records", "summary", "table", "ablation", "lines", "distributions"):
        assert paths[key].exists()
