"""Batch experiment driver.

Every subcommand writes ``<out-dir>/<command>.csv`` (metrics) and
``<out-dir>/<command>.manifest.json`` (parameters, timing, files).  All
randomness comes from ``SeedSequence(seed, spawn_key=(stream, ...))`` so
results do not depend on ``--workers``.

Exit codes: 0 success, 1 invalid flags, 2 a checked bound or invariant
failed, 3 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

EXIT_OK, EXIT_FLAGS, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3

# stream tags keep the random streams of different stages apart
STREAM_INSTANCE, STREAM_SAMPLE, STREAM_SWEEP, STREAM_BOUND, STREAM_CYCLE, STREAM_BLOCK, STREAM_ORACLE = range(7)
CHUNK = 250

SWEEP_COLUMNS = ["d", "p", "trials", "mean_success", "stderr", "ln_mean", "seed", "wall_ms"]
BASELINE_COLUMNS = ["d", "b", "affected_count", "trials", "mean_success", "ln_mean", "bound_minus_affected_ln2", "seed"]


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise FlagError(message)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def p_key(p: float) -> int:
    """Integer stream key of a noise rate, stable under reordering of ``--p``."""
    return int(round(p * 10**9))


def instance_input(d: int, seed: int, index: int = 0) -> np.ndarray:
    from .relation import random_input

    return random_input(d, rng_for(seed, STREAM_INSTANCE, index))


def _instance(d: int, seed: int, index: int = 0):
    from .relation import make_instance

    return make_instance(d, instance_input(d, seed, index))


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(k, min(CHUNK, trials - k * CHUNK)) for k in range(-(-trials // CHUNK))]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row.get(c) is None else _fmt(row[c]) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _ln(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# workers (module level so process pools can pickle them)


def _sweep_chunk(task):
    from .noise import NoiseModel, twirled_success_log2

    d, seed, index, p, idle, k, n = task
    inst = _instance(d, seed, index)
    return twirled_success_log2(inst, NoiseModel(p, idle), rng_for(seed, STREAM_SWEEP, p_key(p), k), n)


def _sample_chunk(task):
    from .relation import member_many

    d, seed, t, k, n = task
    rng = rng_for(seed, STREAM_SAMPLE, k)
    outs, ok = [], np.ones(n, dtype=bool)
    for c in range(t):
        inst = _instance(d, seed, c)
        z = inst.sampler.sample(rng, n)
        ok &= member_many(inst.subspace, z)
        outs.append(z)
    return np.concatenate(outs, axis=1), ok


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, csv columns, rows, extra manifest)


def cmd_gen(a):
    from .relation import amplification_params

    rows = []
    for c in range(a.t):
        inst = _instance(a.d, a.seed, c)
        name = f"instance_{c}.json"
        with open(os.path.join(a.out_dir, name), "w") as fh:
            fh.write(inst.to_json(include_subspace=True))
        rows.append({"d": a.d, "copy": c, "m": inst.m, "r": inst.subspace.r, "file": name, "seed": a.seed})
    extra = {}
    if a.epsilon is not None:
        ap = amplification_params(a.epsilon, a.d)
        extra["amplification"] = {"epsilon": ap.epsilon, "l": ap.l, "t_digits": len(str(ap.t)), "n_e": ap.n_e, "m_e": ap.m_e}
    return EXIT_OK, ["d", "copy", "m", "r", "file", "seed"], rows, extra


def cmd_sample(a):
    tasks = [(a.d, a.seed, a.t, k, n) for k, n in _chunks(a.trials)]
    parts = _map(_sample_chunk, tasks, a.workers)
    z = np.concatenate([p[0] for p in parts])
    ok = np.concatenate([p[1] for p in parts])
    with open(os.path.join(a.out_dir, "samples.txt"), "w") as fh:
        for row in z:
            fh.write("".join("1" if v else "0" for v in row) + "\n")
    rows = [{"d": a.d, "t": a.t, "trials": a.trials, "verified": int(ok.sum()), "success": float(ok.mean()), "seed": a.seed}]
    code = EXIT_OK if ok.all() else EXIT_VERIFY
    return code, ["d", "t", "trials", "verified", "success", "seed"], rows, {"samples_file": "samples.txt"}


def _twirl_logs(a, p: float) -> tuple[np.ndarray, float]:
    t0 = time.perf_counter()
    tasks = [(a.d, a.seed, 0, p, a.noise_idle, k, n) for k, n in _chunks(a.trials)]
    logs = np.concatenate(_map(_sweep_chunk, tasks, a.workers))
    return logs, (time.perf_counter() - t0) * 1000


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return float(vals.mean()), se


def cmd_sweep_noise(a):
    rows, timing = [], {}
    for p in a.p:
        if p == 0:
            mean, se, ms = 1.0, 0.0, 0.0
        else:
            logs, ms = _twirl_logs(a, p)
            mean, se = _mean_se(np.exp2(logs))
        timing[repr(p)] = round(ms, 3)
        rows.append(
            {
                "d": a.d,
                "p": p,
                "trials": a.trials,
                "mean_success": mean,
                "stderr": se,
                "ln_mean": _ln(mean),
                "seed": a.seed,
                "wall_ms": round(ms, 3) if a.record_wall_time else None,
            }
        )
    return EXIT_OK, SWEEP_COLUMNS, rows, {"wall_ms_per_p": timing}


def cmd_bound_check(a):
    from .classical import random_guess_success
    from .geometry import enumerate_disjoint_triangles, extended_gd
    from .noise import NoiseModel, cycle_satisfaction_rate, no_fault_probability, theorem2_bound

    inst = _instance(a.d, a.seed)
    guess = random_guess_success(inst)
    cycles = enumerate_disjoint_triangles(extended_gd(a.d))
    rows = []
    for p in a.p:
        nm = NoiseModel(p, a.noise_idle)
        if p == 0:
            mean, se = 1.0, 0.0
        else:
            mean, se = _mean_se(np.exp2(_twirl_logs(a, p)[0]))
        base = {"d": a.d, "p": p, "trials": a.trials, "seed": a.seed}
        bound = theorem2_bound(guess, p)
        rows.append({**base, "check": "theorem2", "measured": mean, "stderr": se, "bound": bound, "holds": mean <= bound + 3 * se})
        floor = no_fault_probability(inst.circuit, nm)
        rows.append({**base, "check": "fault_free_floor", "measured": mean, "stderr": se, "bound": floor, "holds": mean >= floor - 3 * se})
        for res in cycle_satisfaction_rate(inst, nm, cycles, a.trials, rng_for(a.seed, STREAM_CYCLE, p_key(p))):
            rows.append(
                {
                    **base,
                    "check": "cycle:" + "-".join(str(v) for v in res["cycle"]),
                    "measured": res["rate"],
                    "stderr": res["stderr"],
                    "bound": res["bound"],
                    "holds": res["rate"] <= res["bound"] + 3 * res["stderr"],
                }
            )
    code = EXIT_OK if all(r["holds"] for r in rows) else EXIT_VERIFY
    cols = ["d", "p", "trials", "check", "measured", "stderr", "bound", "holds", "seed"]
    return code, cols, rows, {"r": inst.subspace.r}


def cmd_baseline_guess(a):
    from .classical import random_guess_success
    from .relation import UniformGuessStrategy, loss_probability

    inst = _instance(a.d, a.seed)
    exact = random_guess_success(inst)
    # empirical check only resolves large values; the exact value is reported
    loss, _ = loss_probability(UniformGuessStrategy(), [inst], a.trials, rng_for(a.seed, STREAM_BLOCK, 0))
    ln_mean = _ln(exact)
    row = {
        "d": a.d,
        "b": None,
        "affected_count": inst.m,
        "trials": a.trials,
        "mean_success": exact,
        "ln_mean": ln_mean,
        "bound_minus_affected_ln2": ln_mean + inst.m * math.log(2),
        "seed": a.seed,
    }
    return EXIT_OK, BASELINE_COLUMNS, [row], {"r": inst.subspace.r, "sampled_success": 1 - loss}


def cmd_baseline_block(a):
    from .classical import BlockSimulator, affected_bound, affected_per_block, partition_blocks

    inst = _instance(a.d, a.seed)
    rows, ok = [], True
    depth = inst.circuit.depth
    for b in a.block_side:
        part = partition_blocks(a.d, b)
        sim = BlockSimulator(inst, part)
        z = sim.sample(rng_for(a.seed, STREAM_BLOCK, b), a.trials)
        vals = sim.success(z)
        mean, se = _mean_se(vals)
        ln_mean = _ln(mean)
        n_aff = int(sim.affected.size)
        slack = 3 * se / mean if mean > 0 else math.inf
        ok &= bool(sim.extendable(z).all())
        ok &= bool(affected_per_block(inst, part).max(initial=0) <= affected_bound(depth, b))
        ok &= ln_mean >= -n_aff * math.log(2) - slack
        rows.append(
            {
                "d": a.d,
                "b": b,
                "affected_count": n_aff,
                "trials": a.trials,
                "mean_success": mean,
                "ln_mean": ln_mean,
                "bound_minus_affected_ln2": ln_mean + n_aff * math.log(2),
                "seed": a.seed,
            }
        )
    return (EXIT_OK if ok else EXIT_VERIFY), BASELINE_COLUMNS, rows, {"depth": depth}


def cmd_oracle_crosscheck(a):
    from .crosscheck import run_suite

    rows = run_suite(a.trials, rng_for(a.seed, STREAM_ORACLE))
    for r in rows:
        r["seed"] = a.seed
    code = EXIT_OK if all(r["ok"] for r in rows) else EXIT_VERIFY
    return code, ["case", "kind", "qubits", "outcomes", "max_abs_err", "ok", "seed"], rows, {}


COMMANDS = {
    "gen": cmd_gen,
    "sample": cmd_sample,
    "sweep-noise": cmd_sweep_noise,
    "bound-check": cmd_bound_check,
    "baseline-guess": cmd_baseline_guess,
    "baseline-block": cmd_baseline_block,
    "oracle-crosscheck": cmd_oracle_crosscheck,
}


# ---------------------------------------------------------------------------
# flags


def _p_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad p list {text!r}")
    if not vals or any(not 0 <= v <= 0.75 for v in vals):
        raise argparse.ArgumentTypeError("every p must lie in [0, 0.75]")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be >= 1")
    return vals


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _grid_d(text: str) -> int:
    v = _positive(text)
    if v < 2 or v % 2:
        raise argparse.ArgumentTypeError("d must be an even integer >= 2")
    return v


def _epsilon(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("epsilon must lie in (0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shallowsep", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    trials_default = {"oracle-crosscheck": 200, "gen": 1}
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--d", type=_grid_d, default=2)
        sp.add_argument("--p", type=_p_list, default=[0.005, 0.01, 0.02, 0.04])
        sp.add_argument("--trials", type=_positive, default=trials_default.get(name, 1000))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--block-side", type=_int_list, default=[2, 4, 8])
        sp.add_argument("--t", type=_positive, default=1, help="independent copies (gen, sample)")
        sp.add_argument("--epsilon", type=_epsilon, default=None)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--workers", type=_positive, default=1)
        sp.add_argument("--noise-idle", choices=["on", "off"], default="on")
        sp.add_argument("--record-wall-time", action="store_true", help="fill the wall_ms CSV column")
    return parser


def run(argv=None) -> int:
    import warnings

    from .geometry import GridValidityWarning
    from .oracle import TooManyQubitsError

    try:
        a = build_parser().parse_args(argv)
    except FlagError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_FLAGS
    a.noise_idle = a.noise_idle == "on"
    params = {k: v for k, v in vars(a).items() if k != "command"}
    os.makedirs(a.out_dir, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridValidityWarning)
            code, cols, rows, extra = COMMANDS[a.command](a)
    except (MemoryError, TooManyQubitsError) as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    elapsed = (time.perf_counter() - t0) * 1000
    csv_name = f"{a.command}.csv"
    _write_csv(os.path.join(a.out_dir, csv_name), cols, rows)
    manifest = {
        "command": a.command,
        "parameters": params,
        "seed": a.seed,
        "started": started,
        "wall_ms": round(elapsed, 3),
        "exit_code": code,
        "metrics_file": csv_name,
        "rows": len(rows),
        **extra,
    }
    with open(os.path.join(a.out_dir, f"{a.command}.manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=_fmt)
    if code == EXIT_VERIFY:
        print("verification failed; see " + csv_name, file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
