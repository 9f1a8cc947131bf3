"""Batch command line: run solver configs, self-check, benchmark projections.

Subcommands
-----------
run CONFIG...
    Execute one or more JSON run configurations. Each run writes
    <outdir>/<label>/trace.csv and summary.json. The output directory is
    resolved as: --output flag, then the VISPLIT_OUTPUT_DIR environment
    variable, then the config's "output" field, then "runs".
check
    Seeded random sweeps of the projection, operator, constraint, loop,
    and audit layers. Exits 3 when any row fails.
bench
    Feasibility-loop cost against the stopping tolerance on a curved set,
    with a polyhedral control where one projection always suffices.

Exit codes: 0 success, 2 configuration problem, 3 solver or check failure.

Run configuration fields (unknown fields are rejected by path):

    family        shipped family name (required)
    params        family parameters, see problems.FAMILY_PARAMS
    schedule      {"kind": "power" | "adaptive_power" | "constant", "a", "p"}
    theta         relaxation factor of the feasibility stage
    x0            starting point: list of numbers, or "random"
    max_outer     outer iteration cap
    target_err    stop at this distance to the known solution
    target_dist   stop at this feasibility distance bound
    cadence       keep every cadence-th trace row
    snapshots     record replay snapshots (bool)
    max_inner     projection budget per feasibility stage
    label         run name, defaults to the family name
    output        fallback output directory
    seed          RNG seed for "random" starting points
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import checks, problems
from .constraints import Constraint
from .errors import ConfigError, VisplitError
from .innerloop import run_inner
from .operators import MaxOfAffine, Quadratic
from .solver import (
    AdaptivePowerStepsize,
    ConstantStepsize,
    PowerStepsize,
    TRACE_COLUMNS,
    run,
)

RUN_KEYS = frozenset(
    {
        "family",
        "params",
        "schedule",
        "theta",
        "x0",
        "max_outer",
        "target_err",
        "target_dist",
        "cadence",
        "snapshots",
        "max_inner",
        "label",
        "output",
        "seed",
    }
)
SCHEDULE_KEYS = frozenset({"kind", "a", "p"})


def _load_configs(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not all(isinstance(c, dict) for c in data):
        raise ConfigError(f"config {path} must hold an object or a list of objects")
    return data


def _validate_run_config(cfg: dict, where: str) -> None:
    for key in cfg:
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown field {where}.{key}")
    if "family" not in cfg:
        raise ConfigError(f"{where}.family is required")
    problems.validate_params(cfg["family"], cfg.get("params", {}), f"{where}.params")
    sched = cfg.get("schedule", {})
    if not isinstance(sched, dict):
        raise ConfigError(f"{where}.schedule must be an object")
    for key in sched:
        if key not in SCHEDULE_KEYS:
            raise ConfigError(f"unknown field {where}.schedule.{key}")
    _build_schedule(sched)

    # Numeric preconditions are rejected at load time, before any run starts.
    if "theta" in cfg and not float(cfg["theta"]) > 0:
        raise ConfigError(f"{where}.theta must be positive")
    for key, low in (("max_outer", 1), ("cadence", 1), ("max_inner", 1)):
        if key in cfg and int(cfg[key]) < low:
            raise ConfigError(f"{where}.{key} must be at least {low}")
    for key in ("target_err", "target_dist"):
        if key in cfg and cfg[key] is not None and not float(cfg[key]) >= 0:
            raise ConfigError(f"{where}.{key} must be nonnegative")
    x0 = cfg.get("x0")
    if x0 is not None and not isinstance(x0, (list, str)):
        raise ConfigError(f'{where}.x0 must be a list of numbers or "random"')


def _build_schedule(spec: dict):
    kind = spec.get("kind", "power")
    a = float(spec.get("a", 1.0))
    p = float(spec.get("p", 1.0))
    if kind == "power":
        return PowerStepsize(a, p)
    if kind == "adaptive_power":
        return AdaptivePowerStepsize(a, p)
    if kind == "constant":
        if "p" in spec:
            raise ConfigError("constant schedule takes no exponent")
        return ConstantStepsize(a)
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if not np.isfinite(v) else v
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _write_trace(path: str, trace) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace:
        lines.append(",".join(_fmt(v) for v in rec.row()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _execute_run(cfg: dict, label: str, outdir: str, args) -> dict:
    problem = problems.build(cfg["family"], cfg.get("params", {}))
    schedule = _build_schedule(cfg.get("schedule", {}))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)

    x0 = cfg.get("x0")
    if isinstance(x0, str):
        if x0 != "random":
            raise ConfigError(f'x0 must be a list of numbers or "random", got {x0!r}')
        x0 = np.random.default_rng(seed).standard_normal(problem.dim)

    cadence = args.cadence if args.cadence is not None else cfg.get("cadence", 1)
    snapshots = bool(args.snapshots or cfg.get("snapshots", False))

    t0 = time.perf_counter()
    state = run(
        problem,
        schedule,
        theta=float(cfg.get("theta", 1.0)),
        x0=x0,
        max_outer=int(cfg.get("max_outer", 1000)),
        target_err=cfg.get("target_err"),
        target_dist=cfg.get("target_dist"),
        cadence=int(cadence),
        snapshots=snapshots,
        max_inner=int(cfg.get("max_inner", 10_000)),
    )
    elapsed = time.perf_counter() - t0

    rundir = os.path.join(outdir, label)
    os.makedirs(rundir, exist_ok=True)
    _write_trace(os.path.join(rundir, "trace.csv"), state.trace)

    final = state.trace[-1]
    summary = {
        "label": label,
        "family": cfg["family"],
        "schedule": schedule.spec(),
        "theta": float(cfg.get("theta", 1.0)),
        "dim": problem.dim,
        "m": problem.m,
        "iterations": state.k,
        "sigma": _jsonable(state.sigma),
        "stop_reason": state.stop_reason,
        "seed": int(seed),
        "final": {c: _jsonable(v) for c, v in zip(TRACE_COLUMNS, final.row())},
        "known_solution": _jsonable(problem.known_solution),
        "solution_estimate": _jsonable(state.x),
        "wall_time_total": elapsed,
    }
    with open(os.path.join(rundir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def _cmd_run(args) -> int:
    jobs = []
    for path in args.configs:
        loaded = _load_configs(path)
        for i, cfg in enumerate(loaded):
            where = f"{path}[{i}]" if len(loaded) > 1 else path
            _validate_run_config(cfg, where)
            jobs.append(cfg)

    # Resolve labels first so duplicates cannot overwrite each other.
    labels = []
    seen = {}
    for i, cfg in enumerate(jobs):
        base = cfg.get("label") or cfg["family"]
        n = seen.get(base, 0)
        seen[base] = n + 1
        labels.append(base if n == 0 else f"{base}-{n}")

    def outdir_for(cfg):
        if args.output:
            return args.output
        env = os.environ.get("VISPLIT_OUTPUT_DIR")
        if env:
            return env
        return cfg.get("output", "runs")

    def one(idx):
        return _execute_run(jobs[idx], labels[idx], outdir_for(jobs[idx]), args)

    summaries = []
    if args.parallel and args.parallel > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            summaries = list(pool.map(one, range(len(jobs))))
    else:
        for idx in range(len(jobs)):
            summaries.append(one(idx))

    for s in summaries:
        final = s["final"]
        err = final.get("err_x")
        err_txt = "n/a" if err is None else f"{err:.3e}"
        print(
            f"{s['label']}: stop={s['stop_reason']} k={s['iterations']} "
            f"dist={final['dist_x']:.3e} err={err_txt}"
        )
    return 0


def _cmd_check(args) -> int:
    rows = checks.run_suite(args.suite, seed=args.seed, trials=args.trials)
    failed = 0
    for row in rows:
        mark = "ok  " if row.passed else "FAIL"
        print(f"{mark} {row.name}: {row.detail}")
        failed += 0 if row.passed else 1
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    return 0 if failed == 0 else 3


def _bench_constraints(dim: int):
    center = np.zeros(dim)
    curved = Constraint(
        Quadratic(2.0 * np.eye(dim), np.zeros(dim), -1.0, label="unit_ball"),
        slater_point=center,
    )
    rows = np.zeros((2, dim))
    rows[0, 0] = 1.0
    flat = Constraint(
        MaxOfAffine(rows, np.zeros(2), label="halfspace_gauge"),
        surrogate=lambda y: max(float(y[0]), 0.0),
    )
    return curved, flat


BENCH_KEYS = frozenset({"grid", "reps", "dim", "seed"})


def _bench_config(args) -> dict:
    cfg = {}
    if args.config:
        loaded = _load_configs(args.config)
        if len(loaded) != 1:
            raise ConfigError(f"{args.config} must hold a single object")
        cfg = loaded[0]
        for key in cfg:
            if key not in BENCH_KEYS:
                raise ConfigError(f"unknown field {args.config}.{key}")
    grid = [float(t) for t in cfg.get("grid", [0.2, 0.1, 0.05, 0.025])]
    if not grid or any(not t > 0 for t in grid):
        raise ConfigError("grid must hold positive tolerances")
    reps = int(args.reps if args.reps is not None else cfg.get("reps", 50))
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    dim = int(cfg.get("dim", 3))
    if dim < 2:
        raise ConfigError("dim must be at least 2")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    return {"grid": grid, "reps": reps, "dim": dim, "seed": seed}


def _cmd_bench(args) -> int:
    cfg = _bench_config(args)
    grid, reps, dim = cfg["grid"], cfg["reps"], cfg["dim"]
    rng = np.random.default_rng(cfg["seed"])
    curved, flat = _bench_constraints(dim)

    means, times = [], []
    for tol in grid:
        counts = []
        t0 = time.perf_counter()
        for _ in range(reps):
            d = rng.standard_normal(dim)
            d /= float(np.linalg.norm(d))
            z = (1.0 + float(rng.uniform(0.05, 2.0))) * d
            counts.append(run_inner(curved, z, 1.0, tol).iterations)
        times.append((time.perf_counter() - t0) / reps)
        means.append(float(np.mean(counts)))

    # A single-tolerance grid gives nothing to fit.
    slope = None
    if len(grid) > 1:
        slope = float(
            np.polyfit(np.log([1.0 / t for t in grid]), np.log(means), 1)[0]
        )

    flat_worst = 0
    for _ in range(reps):
        z = rng.standard_normal(dim)
        z[0] = abs(z[0]) + 0.1
        flat_worst = max(flat_worst, run_inner(flat, z, 1.0, min(grid)).iterations)

    print("tolerance  mean projections  mean seconds (curved set)")
    for tol, mean, sec in zip(grid, means, times):
        print(f"{tol:9.3f}  {mean:16.2f}  {sec:.2e}")
    if slope is not None:
        print(f"growth exponent vs 1/tolerance: {slope:.3f}")
    print(f"polyhedral control, worst projections: {flat_worst}")

    outdir = args.output or os.environ.get("VISPLIT_OUTPUT_DIR")
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        payload = {
            "grid": grid,
            "mean_iterations": means,
            "mean_seconds": times,
            "growth_exponent": slope,
            "polyhedral_worst_iterations": flat_worst,
            "reps": reps,
            "dim": dim,
            "seed": cfg["seed"],
        }
        with open(os.path.join(outdir, "bench.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visplit",
        description="Batch solver for split variational inequalities with "
        "relaxed halfspace projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute JSON run configurations")
    p_run.add_argument("configs", nargs="+", help="JSON config files")
    p_run.add_argument("--output", help="output directory (overrides env and config)")
    p_run.add_argument("--cadence", type=int, help="keep every N-th trace row")
    p_run.add_argument("--snapshots", action="store_true", help="record replay snapshots")
    p_run.add_argument("--seed", type=int, help="seed for random starting points")
    p_run.add_argument("--parallel", type=int, help="run configs in N worker threads")

    p_check = sub.add_parser("check", help="run self-check sweeps")
    p_check.add_argument(
        "--suite",
        default="all",
        choices=sorted(checks.SUITES) + ["all"],
        help="which suite to run",
    )
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--trials", type=int, default=None)

    p_bench = sub.add_parser("bench", help="benchmark the feasibility loop")
    p_bench.add_argument(
        "config", nargs="?", help="optional JSON object: grid, reps, dim, seed"
    )
    p_bench.add_argument("--output", help="directory for bench.json")
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--reps", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_bench(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except VisplitError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
