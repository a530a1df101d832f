"""Command-line entry point: gen | synth | train | bench | verify | oracle.

Exit codes: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench
from . import circuit as circ_mod
from . import generators as gen
from .gf2core import BitMatrix, load as load_matrix, save as save_matrix
from .pmh import PmhConfig, synthesize_pmh
from .resize import unembed_circuit

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2
METHOD_CHOICES = ("pmh", "rl", "pmh-star", "exact")

log = logging.getLogger("cnotsynth")


class UsageError(Exception):
    pass


class VerifyFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty size list")
    return out


def _settings(text: str) -> list[str]:
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    for s in names:
        if s not in gen.SETTINGS:
            raise argparse.ArgumentTypeError(f"unknown setting {s!r} (choose from {', '.join(gen.SETTINGS)})")
    return names


def _methods(text: str) -> list[str]:
    names = [s.strip().replace("-", "_") for s in text.split(",") if s.strip()]
    for s in names:
        if s not in bench.METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {s!r}")
    return names


def _read_matrix(path) -> BitMatrix:
    try:
        return load_matrix(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except ValueError as e:
        raise UsageError(f"{path}: {e}")


def _load_policy(path):
    from .ppo import load_checkpoint
    if path is None:
        raise UsageError("--policy is required for this method")
    try:
        return load_checkpoint(path)[0]
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except ValueError as e:
        raise UsageError(str(e))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cnotsynth", description="CNOT circuit synthesis for linear reversible circuits.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="write benchmark suites as matrix files plus a manifest")
    g.add_argument("--out", "--suite-dir", dest="out", required=True, help="output directory")
    g.add_argument("--settings", type=_settings, default=list(gen.SETTINGS))
    g.add_argument("--sizes", type=_int_list, default=list(range(3, 16)), help="e.g. 3-15 or 4,8")
    g.add_argument("--count", type=int, default=100, help="matrices per (setting, n)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--log-base", type=float, default=gen.DEFAULT_LOG_BASE)

    s = sub.add_parser("synth", help="synthesize a circuit for one matrix")
    s.add_argument("--in", dest="inp", required=True, help="matrix text file")
    s.add_argument("--out", required=True, help="circuit text file")
    s.add_argument("--summary", help="JSON summary path (default: <out>.json)")
    s.add_argument("--method", choices=METHOD_CHOICES, default="pmh")
    s.add_argument("--policy", help="policy checkpoint (rl, pmh-star)")
    s.add_argument("--m", type=int, help="block size for pmh-star without a policy")
    s.add_argument("--stripe-width", type=int, default=2)
    s.add_argument("--runs", type=int, default=100, help="sampled episodes for rl")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--qasm", action="store_true", help="write OpenQASM 2 instead of the text format")

    t = sub.add_parser("train", help="train a policy with PPO")
    t.add_argument("--m", type=int, required=True, help="matrix size the policy acts on")
    t.add_argument("--schedule", help="JSON curriculum file (default: the 100k-episode schedule)")
    t.add_argument("--episodes-scale", type=float, default=1.0, help="multiply every phase range")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True, help="final checkpoint path")
    t.add_argument("--checkpoint-dir", help="also keep per-phase checkpoints here")
    t.add_argument("--max-steps", type=int, help="episode step limit (default 3*m^2)")
    t.add_argument("--log-base", type=float, default=gen.DEFAULT_LOG_BASE)

    b = sub.add_parser("bench", help="run the benchmark protocol")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--methods", type=_methods, default=None,
                   help="comma list of pmh,rl,pmh_star,exact (default: pmh, plus rl,pmh_star with --policy)")
    b.add_argument("--policy", help="policy checkpoint")
    b.add_argument("--settings", type=_settings, default=list(gen.SETTINGS))
    b.add_argument("--sizes", type=_int_list, default=list(range(3, 16)))
    b.add_argument("--suite-size", type=int, default=100)
    b.add_argument("--runs", type=int, default=100, help="best-of runs per matrix")
    b.add_argument("--stripe-width", type=int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--log-base", type=float, default=gen.DEFAULT_LOG_BASE)
    b.add_argument("--jobs", type=int, default=1, help="worker processes (1 = single-threaded)")
    b.add_argument("--timing", action="store_true", help="add wall_time to records.csv")

    v = sub.add_parser("verify", help="check that a circuit reduces a matrix to the identity")
    v.add_argument("matrix")
    v.add_argument("circuit")

    o = sub.add_parser("oracle", help="exact minimal CNOT count (n <= 5)")
    o.add_argument("--in", dest="inp", required=True)
    o.add_argument("--out", help="also write the witness circuit here")
    return p


# -- commands ------------------------------------------------------------


def cmd_gen(a) -> int:
    if a.count < 1:
        raise UsageError("--count must be >= 1")
    root = Path(a.out)
    manifest = []
    for setting in a.settings:
        for n in a.sizes:
            if n < 2:
                raise UsageError("sizes must be >= 2")
            seed = gen.suite_seed(a.seed, setting, n)
            d = root / setting / f"n{n:02d}"
            d.mkdir(parents=True, exist_ok=True)
            files = []
            for i, mat in enumerate(gen.gen_suite(setting, n, a.count, seed, a.log_base)):
                name = f"matrix_{i:03d}.txt"
                save_matrix(mat, d / name)
                files.append(f"{setting}/n{n:02d}/{name}")
            manifest.append({"setting": setting, "n": n, "seed": seed, "count": a.count,
                             "budget": gen.setting_budget(setting, n, a.log_base), "files": files})
    (root / "manifest.json").write_text(json.dumps(
        {"base_seed": a.seed, "log_base": a.log_base, "suites": manifest}, indent=1) + "\n")
    print(f"wrote {sum(x['count'] for x in manifest)} matrices to {root}")
    return EXIT_OK


def cmd_synth(a) -> int:
    from . import exact
    mat = _read_matrix(a.inp)
    cfg = PmhConfig(a.stripe_width)
    try:
        if a.method == "pmh":
            res = synthesize_pmh(mat, cfg)
        elif a.method == "exact":
            if mat.n > exact.ORACLE_MAX_N:
                raise UsageError(f"exact method supports n <= {exact.ORACLE_MAX_N}")
            c = exact.optimal_circuit(mat)
            res = circ_mod.SynthesisResult(c, "exact", True, 0.0, {})
        elif a.method == "pmh-star":
            m = a.m if a.m is not None else _load_policy(a.policy).m
            if not 1 <= m < mat.n:
                raise UsageError(f"pmh-star needs a block size 1 <= m < n={mat.n}")
            res = bench.pmh_star(mat, m, cfg)
        else:
            params = _load_policy(a.policy)
            res = bench.rl_pipeline(params, mat, a.runs, a.seed, pmh_cfg=cfg)
            confined = res.extra.pop("confined_circuit", None)
            if res.extra["route"] == "embed":
                small = unembed_circuit(res.circuit, params.m - mat.n)
                if small is None and confined is not None:
                    small = unembed_circuit(confined, params.m - mat.n)
                if small is None:
                    # every solving run used padding qubits: no n-qubit circuit from the policy
                    small = synthesize_pmh(mat, cfg).circuit
                    res.extra["fallback"] = True
                res.circuit = small
    except bench.VerificationError as e:
        raise VerifyFailed(str(e))
    except ValueError as e:
        raise UsageError(str(e))

    if res.circuit.n != mat.n or not circ_mod.verify_solves(mat, res.circuit):
        raise VerifyFailed("synthesized circuit does not solve the matrix; nothing written")
    out = Path(a.out)
    out.write_text(circ_mod.to_qasm(res.circuit) if a.qasm else circ_mod.serialize(res.circuit))
    summary = {
        "input": str(a.inp), "n": mat.n, "method": res.method, "cnot_count": res.count,
        "verified": True, "circuit_qubits": res.circuit.n, "seed": a.seed,
        **{k: v for k, v in res.extra.items()},
    }
    Path(a.summary or f"{out}.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(res.count)
    return EXIT_OK


def cmd_train(a) -> int:
    from .ppo import PpoConfig, save_checkpoint, train
    from .rlenv import Schedule, default_schedule
    if a.m < 2:
        raise UsageError("--m must be >= 2")
    if a.episodes_scale <= 0:
        raise UsageError("--episodes-scale must be positive")
    if a.schedule:
        try:
            schedule = Schedule.from_json(Path(a.schedule).read_text(), a.log_base)
        except FileNotFoundError:
            raise UsageError(f"no such file: {a.schedule}")
        except (ValueError, KeyError) as e:
            raise UsageError(f"{a.schedule}: bad schedule: {e}")
    else:
        schedule = default_schedule()
        schedule = type(schedule)(schedule.phases, a.log_base)
    if a.episodes_scale != 1.0:
        schedule = schedule.scaled(a.episodes_scale)
    cfg = PpoConfig(seed=a.seed)

    def progress(entry):
        log.info("update %d episodes %d phase %d loss %.4f entropy %.3f", entry["update"],
                 entry["episodes_finished"], entry["phase"], entry["loss"], entry["entropy"])

    res = train(a.m, schedule, cfg, max_steps=a.max_steps, out_dir=a.checkpoint_dir, progress=progress)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(res.params, out, cfg, {"schedule": json.loads(schedule.to_json())})
    stats = [{"class": ph.kind, "budget_expr": ph.budget_expr, **st.as_dict()}
             for ph, st in zip(schedule.phases, res.phase_stats)]
    # wall-clock fields stay out of the file so reruns are byte-identical
    updates = [{k: v for k, v in e.items() if k != "elapsed"} for e in res.log]
    Path(f"{out}.log.json").write_text(json.dumps({"phases": stats, "updates": updates}, indent=1) + "\n")
    for row in stats:
        print(f"{row['class']:<13}{row['budget_expr'] or '':<7}episodes {row['episodes']:>6}  "
              f"solve {row['solve_rate']:.3f}  length {row['mean_length']:.2f}")
    return EXIT_OK


def cmd_bench(a) -> int:
    params = _load_policy(a.policy) if a.policy else None
    methods = a.methods or (["pmh", "rl", "pmh_star"] if params else ["pmh"])
    try:
        cfg = bench.BenchConfig(tuple(a.sizes), tuple(a.settings), a.suite_size, a.runs, tuple(methods),
                                a.seed, a.stripe_width, log_base=a.log_base, timing=a.timing)
    except ValueError as e:
        raise UsageError(str(e))
    try:
        records = bench.run_benchmark(cfg, params, jobs=a.jobs)
    except bench.VerificationError as e:
        raise VerifyFailed(str(e))
    except ValueError as e:
        raise UsageError(str(e))
    paths = bench.write_outputs(records, a.out, timing=a.timing)
    sys.stdout.write(paths["table"].read_text())
    return EXIT_OK


def cmd_verify(a) -> int:
    mat = _read_matrix(a.matrix)
    try:
        circ = circ_mod.load(a.circuit)
    except FileNotFoundError:
        raise UsageError(f"no such file: {a.circuit}")
    except ValueError as e:
        raise UsageError(f"{a.circuit}: {e}")
    if circ.n != mat.n:
        raise VerifyFailed(f"circuit acts on {circ.n} qubits, matrix is {mat.n}x{mat.n}")
    if not circ_mod.verify_solves(mat, circ):
        raise VerifyFailed("circuit does not reduce the matrix to the identity")
    print(f"ok: {len(circ)} CNOTs")
    return EXIT_OK


def cmd_oracle(a) -> int:
    from . import exact
    mat = _read_matrix(a.inp)
    try:
        count, witness = exact.optimal_count(mat, witness=True)
    except ValueError as e:
        raise UsageError(str(e))
    print(count)
    sys.stdout.write(circ_mod.serialize(witness))
    if a.out:
        circ_mod.save(witness, a.out)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "synth": cmd_synth, "train": cmd_train, "bench": cmd_bench,
            "verify": cmd_verify, "oracle": cmd_oracle}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[a.command](a)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except VerifyFailed as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
