"""Command line entry point: ``covertime-lab <experiment> [options]``.

Exit codes: 0 success, 2 usage error, 3 runtime (simulation) error.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    UsageError,
    parse_config_file,
    run_experiment,
    summarize,
    to_csv,
)

# flag -> parameter key
FLAG_KEYS = {
    "eps": "eps", "delta": "delta", "bigk": "K", "bigr": "R", "n": "n", "reps": "reps",
    "h_max": "h_max", "c_step": "c_step",
}
META_KEYS = {"seed", "master_seed", "workers", "out", "out_path", "experiment"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="covertime-lab",
        description="Brownian cover-time experiments on the unit torus; writes CSV.")
    ap.add_argument("experiment", nargs="?", help="one of: " + ", ".join(EXPERIMENTS))
    ap.add_argument("--eps", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--bigk", type=int, help="number of scales K")
    ap.add_argument("--bigr", type=float, help="outer radius R")
    ap.add_argument("--n", type=int)
    ap.add_argument("--reps", type=int, help="number of replicate rows")
    ap.add_argument("--seed", type=int, help="64-bit master seed")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--h-max", dest="h_max", type=float)
    ap.add_argument("--c-step", dest="c_step", type=float)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    ap.add_argument("--config", help="flat key=value file; flags override it")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="any other experiment parameter, e.g. --set d=0.45")
    ap.add_argument("--summary", action="store_true", help="print a column summary to stderr")
    ap.add_argument("--list", action="store_true", help="list experiments and exit")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_vals = parse_config_file(args.config) if args.config else {}
    name = args.experiment or file_vals.get("experiment")
    if not name:
        raise UsageError("no experiment given")
    params: dict = {}
    seed, workers, out = 0, 1, None
    for k, v in file_vals.items():
        if k in ("seed", "master_seed"):
            seed = v
        elif k == "workers":
            workers = v
        elif k in ("out", "out_path"):
            out = v
        elif k == "experiment":
            continue
        else:
            params[FLAG_KEYS.get(k, k)] = v
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag)
        if v is not None:
            params[key] = v
    if args.seed is not None:
        seed = args.seed
    if args.workers is not None:
        workers = args.workers
    if args.out is not None:
        out = args.out
    try:
        seed, workers = int(seed), int(workers)
    except ValueError:
        raise UsageError("seed/workers: must be integers") from None
    return ExperimentConfig(name=name, params=params, master_seed=seed, workers=workers,
                            out_path=out)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list:
        for name, exp in EXPERIMENTS.items():
            print(f"{name:12s} {exp.description}")
        return 0
    try:
        cfg = config_from_args(args)
        cfg.resolved()
    except (UsageError, OSError) as e:
        print(f"covertime-lab: usage error: {e}", file=sys.stderr)
        return 2
    try:
        rows = run_experiment(cfg)
    except Exception as e:  # any failure inside a simulation
        print(f"covertime-lab: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    text = to_csv(cfg, rows)
    if cfg.out_path:
        with open(cfg.out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        for col, s in summarize(rows).items():
            print(f"{col:16s} mean={s.mean:.6g} se={s.stderr:.3g} "
                  f"p2.5={s.p2_5:.6g} p97.5={s.p97_5:.6g}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
