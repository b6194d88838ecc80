"""Cover-time campaign: ratio T_eps / (ln eps)^2 across eps, with the lattice bracket.

Example:
    python scripts/cover_campaign.py --eps 0.05 0.02 --reps 20 --outdir runs/
"""

import argparse
import math
from pathlib import Path

import numpy as np

from covertime_lab.experiments import EXPERIMENTS, ExperimentConfig, run_experiment, write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.02])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=None)
    args = ap.parse_args()

    cols = EXPERIMENTS["cover"].columns
    print(f"{'eps':>8} {'median/(2/pi)':>14} {'IQR/(2/pi)':>11} {'min':>7} {'max':>7} bracket_ok")
    for eps in args.eps:
        cfg = ExperimentConfig("cover", {"eps": eps, "reps": args.reps},
                               master_seed=args.seed, workers=args.workers)
        rows = run_experiment(cfg)
        if args.outdir:
            args.outdir.mkdir(parents=True, exist_ok=True)
            write_csv(cfg, rows, args.outdir / f"cover_eps{eps:g}.csv")
        v = np.array([r.values for r in rows])
        ratio = v[:, cols.index("ratio")] / (2 / math.pi)
        ok = np.all(v[:, cols.index("bracket_lo")] <= v[:, cols.index("bracket_hi")])
        q1, q2, q3 = np.percentile(ratio, [25, 50, 75])
        print(f"{eps:8g} {q2:14.3f} {q3 - q1:11.3f} {ratio.min():7.3f} {ratio.max():7.3f} {ok}")


if __name__ == "__main__":
    main()
