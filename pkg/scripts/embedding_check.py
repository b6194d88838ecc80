"""Embedded random walk: next-crossing direction at interior scales and the
fraction of 1 -> 0 excursions that reach the innermost scale (gambler's ruin)."""

import argparse
import math

import numpy as np

from covertime_lab.bm import BmConfig, StopRule, direction_counts, run_excursions
from covertime_lab.torus import make_scale_ladder


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--R", type=float, default=0.25)
    ap.add_argument("--ratio", type=float, default=2.0, help="r_{i}/r_{i+1}")
    ap.add_argument("--excursions", type=int, default=15_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lad = make_scale_ladder(args.R, args.R / args.ratio**args.K, args.K)
    tr = run_excursions([(0.5, 0.5)], lad, StopRule.excursions(args.excursions), BmConfig(),
                        rng=np.random.default_rng(args.seed))[0]
    cnt = direction_counts([tr], args.K)
    print(f"{'scale':>5} {'down':>7} {'up':>7} {'up frac':>8} {'z':>6}")
    for l in range(1, args.K):
        down, up = cnt[l]
        tot = down + up
        print(f"{l:5d} {down:7d} {up:7d} {up / tot:8.4f} {(up - tot / 2) / math.sqrt(tot / 4):6.2f}")
    deep = np.mean([args.K in tr.srw_path[a:b + 1] for a, b in tr.excursion_boundaries])
    n = len(tr.excursion_boundaries)
    print(f"excursions reaching K: {deep:.4f} (1/K = {1 / args.K:.4f}, "
          f"se {math.sqrt(deep * (1 - deep) / n):.4f})")


if __name__ == "__main__":
    main()
