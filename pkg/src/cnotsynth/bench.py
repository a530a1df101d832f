"""Benchmark protocol: suites, method pipelines, aggregation, ablation and plot data.

For each (setting, n) a suite of random-CNOT matrices is generated and every
requested method synthesizes each matrix:

* ``pmh``      PMH on the full matrix
* ``rl``       the policy pipeline: embed (n < m), direct (n = m) or stripe (n > m),
               then best-of-``runs`` sampling
* ``pmh_star`` striping to m followed by PMH on the reduced block (n > m only)
* ``exact``    the BFS oracle (n <= 5 only)

Every circuit is replayed before it is recorded; a failed replay aborts.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import generators as gen
from .circuit import Circuit, SynthesisResult, verify_solves
from .exact import ORACLE_MAX_N, optimal_circuit
from .gf2core import BitMatrix
from .pmh import PmhConfig, synthesize_pmh
from .ppo import PolicyParams, rollout_runs
from .resize import embed, gaussian_stripe, touches_padding, unembed_circuit

SCHEMA = "cnotsynth-bench v1"
METHODS = ("pmh", "rl", "pmh_star", "exact")


class VerificationError(RuntimeError):
    """A synthesized circuit failed to replay its matrix to the identity."""


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[int, ...] = tuple(range(3, 16))
    settings: tuple[str, ...] = gen.SETTINGS
    suite_size: int = 100
    runs_per_matrix: int = 100
    methods: tuple[str, ...] = ("pmh", "rl", "pmh_star")
    seed: int = 0
    stripe_width: int = 2
    max_steps: Optional[int] = None
    log_base: float = gen.DEFAULT_LOG_BASE
    timing: bool = False

    def __post_init__(self):
        if self.suite_size < 1:
            raise ValueError("suite_size must be >= 1")
        if any(not 2 <= n <= 64 for n in self.sizes):
            raise ValueError("sizes must lie in [2, 64]")
        for s in self.settings:
            if s not in gen.SETTINGS:
                raise ValueError(f"unknown setting {s!r}")
        for meth in self.methods:
            if meth not in METHODS:
                raise ValueError(f"unknown method {meth!r}")


@dataclass
class BenchRecord:
    method: str
    setting: str
    n: int
    matrix_id: int
    cnot_count: int
    prefix_count: int = 0
    route: str = ""
    padding_gates: int = 0
    confined_count: Optional[int] = None
    verified: bool = True
    fallback: bool = False
    wall_time: float = 0.0

    def key(self):
        return (gen.SETTINGS.index(self.setting), self.n, self.matrix_id, METHODS.index(self.method))


RECORD_FIELDS = [f.name for f in fields(BenchRecord)]


# -- pipelines -----------------------------------------------------------


def _checked(m: BitMatrix, circ: Circuit, what: str) -> Circuit:
    if not verify_solves(m, circ):
        raise VerificationError(f"{what}: circuit does not solve the matrix")
    return circ


def rl_pipeline(params: PolicyParams, matrix: BitMatrix, runs: int = 100, seed: int = 0,
                max_steps: Optional[int] = None, pmh_cfg: PmhConfig = PmhConfig()) -> SynthesisResult:
    """Solve an n x n matrix with an m x m policy, resizing as needed.

    The result's ``extra`` carries ``route``, ``prefix_count`` (striping
    gates), ``padding_gates``, ``confined_count`` and ``confined_circuit``
    (embedding only: best run that avoids padding qubits) and ``fallback`` (no sampled run solved
    the block, PMH used instead). For embedded instances the circuit lives
    on the m-qubit register unless a padding-free run is the best one.
    """
    m, n = params.m, matrix.n
    t0 = time.perf_counter()
    extra = {"prefix_count": 0, "padding_gates": 0, "confined_count": None, "fallback": False}

    def solve_block(block: BitMatrix) -> tuple[Circuit, list]:
        outcomes = rollout_runs(params, block, runs, max_steps, seed)
        solved = [c for c in outcomes if c is not None]
        if not solved:
            extra["fallback"] = True
            return synthesize_pmh(block, pmh_cfg).circuit, []
        best = min(solved, key=len)  # min keeps the earliest on ties
        return best, solved

    if n < m:
        k = m - n
        big = embed(matrix, m)
        circ, solved = solve_block(big)
        _checked(big, circ, "embedded block")
        confined = [c for c in solved if not touches_padding(c, k)]
        best_confined = min(confined, key=len) if confined else None
        extra.update(route="embed", padding_gates=touches_padding(circ, k),
                     confined_count=len(best_confined) if confined else None,
                     confined_circuit=best_confined)
        if extra["fallback"]:
            extra["confined_count"] = len(circ)
        small = unembed_circuit(circ, k)
        if small is not None:
            _checked(matrix, small, "un-embedded circuit")
        method = "rl+embed"
    elif n == m:
        circ, _ = solve_block(matrix)
        _checked(matrix, circ, "direct")
        extra["route"] = "direct"
        method = "rl"
    else:
        red = gaussian_stripe(matrix, m, pmh_cfg)
        block, _ = solve_block(red.reduced)
        circ = red.assemble(_checked(red.reduced, block, "reduced block"))
        _checked(matrix, circ, "striped pipeline")
        extra.update(route="stripe", prefix_count=red.count)
        if len(circ) != red.count + len(block):
            raise AssertionError("striped pipeline count is not prefix + block")
        method = "rl+stripe"
    return SynthesisResult(circ, method, True, time.perf_counter() - t0, extra)


def pmh_star(matrix: BitMatrix, m: int, pmh_cfg: PmhConfig = PmhConfig()) -> SynthesisResult:
    """Stripe down to m, then PMH on the reduced block."""
    t0 = time.perf_counter()
    red = gaussian_stripe(matrix, m, pmh_cfg)
    block = synthesize_pmh(red.reduced, pmh_cfg).circuit
    circ = _checked(matrix, red.assemble(block), "pmh_star")
    return SynthesisResult(circ, "pmh_star", True, time.perf_counter() - t0,
                           {"prefix_count": red.count})


def matrix_seed(seed: int, setting: str, n: int, matrix_id: int) -> int:
    ss = np.random.SeedSequence([seed, gen.SETTINGS.index(setting), n, matrix_id, 1])
    return int(ss.generate_state(1, np.uint32)[0])


def _bench_group(cfg: BenchConfig, setting: str, n: int, params: Optional[PolicyParams]) -> list[BenchRecord]:
    suite = gen.gen_suite(setting, n, cfg.suite_size, gen.suite_seed(cfg.seed, setting, n), cfg.log_base)
    pcfg = PmhConfig(cfg.stripe_width)
    m = params.m if params is not None else None
    out = []
    for mid, mat in enumerate(suite):
        if "pmh" in cfg.methods:
            res = synthesize_pmh(mat, pcfg)
            _checked(mat, res.circuit, "pmh")
            out.append(BenchRecord("pmh", setting, n, mid, res.count, route="full",
                                   wall_time=res.wall_time))
        if "rl" in cfg.methods:
            res = rl_pipeline(params, mat, cfg.runs_per_matrix, matrix_seed(cfg.seed, setting, n, mid),
                              cfg.max_steps, pcfg)
            ex = res.extra
            out.append(BenchRecord("rl", setting, n, mid, res.count, ex["prefix_count"], ex["route"],
                                   ex["padding_gates"], ex["confined_count"], True, ex["fallback"],
                                   res.wall_time))
        if "pmh_star" in cfg.methods and m is not None and n > m:
            res = pmh_star(mat, m, pcfg)
            out.append(BenchRecord("pmh_star", setting, n, mid, res.count, res.extra["prefix_count"],
                                   "stripe", wall_time=res.wall_time))
        if "exact" in cfg.methods and n <= ORACLE_MAX_N:
            t0 = time.perf_counter()
            circ = _checked(mat, optimal_circuit(mat), "exact")
            out.append(BenchRecord("exact", setting, n, mid, len(circ), route="full",
                                   wall_time=time.perf_counter() - t0))
    return out


def run_benchmark(cfg: BenchConfig, params: Optional[PolicyParams] = None,
                  jobs: int = 1) -> list[BenchRecord]:
    """All records, ordered by (setting, n, matrix_id, method)."""
    if ("rl" in cfg.methods or "pmh_star" in cfg.methods) and params is None:
        raise ValueError("rl / pmh_star methods need a policy (its m sets the block size)")
    groups = [(s, n) for s in cfg.settings for n in cfg.sizes]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_bench_group, [cfg] * len(groups), *zip(*groups),
                                  [params] * len(groups)))
    else:
        parts = [_bench_group(cfg, s, n, params) for s, n in groups]
    records = [r for part in parts for r in part]
    records.sort(key=BenchRecord.key)
    return records


# -- CSV I/O -------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_csv(path_or_buf, header: Sequence[str], rows: Iterable[Sequence], comment: str = "") -> None:
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        fh.write(f"# {SCHEMA}{'; ' + comment if comment else ''}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def read_csv(path_or_text) -> list[dict]:
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    else:
        text = path_or_text
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def write_records(records: Sequence[BenchRecord], path, timing: bool = False) -> None:
    cols = RECORD_FIELDS if timing else [c for c in RECORD_FIELDS if c != "wall_time"]
    write_csv(path, cols, ([getattr(r, c) for c in cols] for r in records))


def parse_records(path_or_text) -> list[BenchRecord]:
    out = []
    for d in read_csv(path_or_text):
        out.append(BenchRecord(
            d["method"], d["setting"], int(d["n"]), int(d["matrix_id"]), int(d["cnot_count"]),
            int(d["prefix_count"]), d["route"], int(d["padding_gates"]),
            int(d["confined_count"]) if d["confined_count"] else None,
            d["verified"] == "1", d["fallback"] == "1", float(d.get("wall_time") or 0.0)))
    return out


# -- aggregation ---------------------------------------------------------


@dataclass
class SummaryRow:
    method: str
    setting: str
    n: int
    count: int
    mean: float
    std: float
    fallbacks: int = 0
    mean_no_fallback: Optional[float] = None


SUMMARY_FIELDS = [f.name for f in fields(SummaryRow)]


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    if not values:
        raise ValueError("empty group")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize(records: Iterable[BenchRecord]) -> list[SummaryRow]:
    groups: dict[tuple, list[BenchRecord]] = defaultdict(list)
    for r in records:
        if not r.verified:
            raise VerificationError(f"unverified record {r}")
        groups[(r.method, r.setting, r.n)].append(r)
    rows = []
    for (meth, setting, n), recs in groups.items():
        counts = [r.cnot_count for r in sorted(recs, key=lambda r: r.matrix_id)]
        mean, std = mean_std(counts)
        clean = [r.cnot_count for r in recs if not r.fallback]
        rows.append(SummaryRow(meth, setting, n, len(recs), mean, std,
                               sum(r.fallback for r in recs),
                               statistics.fmean(clean) if clean else None))
    rows.sort(key=lambda s: (METHODS.index(s.method), gen.SETTINGS.index(s.setting), s.n))
    return rows


def write_summary(rows: Sequence[SummaryRow], path) -> None:
    write_csv(path, SUMMARY_FIELDS, ([getattr(r, c) for c in SUMMARY_FIELDS] for r in rows),
              "std is the sample standard deviation")


def render_table(rows: Sequence[SummaryRow], methods: Sequence[str] = ("rl", "pmh")) -> str:
    """Aligned text table: one line per n, ``mean ± std`` per (setting, method)."""
    by = {(r.method, r.setting, r.n): r for r in rows}
    settings = [s for s in gen.SETTINGS if any(r.setting == s for r in rows)]
    sizes = sorted({r.n for r in rows})
    header1 = ["Setting"] + [s.capitalize() for s in settings for _ in methods]
    header2 = ["Size"] + [meth.upper() for _ in settings for meth in methods]
    lines = [header1, header2]
    for n in sizes:
        cells = [str(n)]
        for s in settings:
            for meth in methods:
                r = by.get((meth, s, n))
                cells.append(f"{r.mean:.2f} ± {r.std:.2f}" if r else "-")
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header1))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines) + "\n"


@dataclass
class AblationRow:
    setting: str
    n: int
    rl_mean: float
    pmh_star_mean: float

    @property
    def difference(self) -> float:
        """Positive when the policy pipeline uses fewer gates than PMH*."""
        return self.pmh_star_mean - self.rl_mean


def ablation_pmh_star(records: Iterable[BenchRecord]) -> list[AblationRow]:
    means: dict[tuple, list[int]] = defaultdict(list)
    for r in records:
        if r.method in ("rl", "pmh_star"):
            means[(r.method, r.setting, r.n)].append(r.cnot_count)
    out = []
    for (meth, setting, n) in sorted({k for k in means if k[0] == "pmh_star"},
                                     key=lambda k: (gen.SETTINGS.index(k[1]), k[2])):
        if ("rl", setting, n) not in means:
            raise ValueError(f"no rl records for ({setting}, {n})")
        out.append(AblationRow(setting, n, statistics.fmean(means[("rl", setting, n)]),
                               statistics.fmean(means[("pmh_star", setting, n)])))
    return out


def write_ablation(rows: Sequence[AblationRow], path) -> None:
    write_csv(path, ["setting", "n", "rl_mean", "pmh_star_mean", "difference"],
              ([r.setting, r.n, r.rl_mean, r.pmh_star_mean, r.difference] for r in rows),
              "difference = mean(pmh_star) - mean(rl); positive means the policy pipeline saves gates")


def emit_plot_data(rows: Sequence[SummaryRow], records: Sequence[BenchRecord], out_dir,
                   min_n: int = 0) -> tuple[Path, Path]:
    """``lines.csv`` (one row per summary group) and ``distributions.csv``
    (one row per record with n >= ``min_n``), both long format."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = out_dir / "lines.csv"
    dists = out_dir / "distributions.csv"
    write_csv(lines, ["method", "setting", "n", "count", "mean", "std"],
              ([r.method, r.setting, r.n, r.count, r.mean, r.std] for r in rows))
    write_csv(dists, ["method", "setting", "n", "matrix_id", "value"],
              ([r.method, r.setting, r.n, r.matrix_id, r.cnot_count] for r in records if r.n >= min_n))
    return lines, dists


def write_outputs(records: Sequence[BenchRecord], out_dir, timing: bool = False) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"records": out_dir / "records.csv", "summary": out_dir / "summary.csv",
             "table": out_dir / "table.txt"}
    write_records(records, paths["records"], timing)
    rows = summarize(records)
    write_summary(rows, paths["summary"])
    paths["table"].write_text(render_table(rows))
    if any(r.method == "pmh_star" for r in records):
        paths["ablation"] = out_dir / "ablation.csv"
        write_ablation(ablation_pmh_star(records), paths["ablation"])
    paths["lines"], paths["distributions"] = emit_plot_data(rows, records, out_dir / "plotdata")
    return paths
