"""Excursion-count proxy T(x) (1/pi) ln(r_0/r_1) against the actual hitting
time of the eps-ball, per center, on one path."""

import argparse

import numpy as np

from covertime_lab.bm import BmConfig
from covertime_lab.cover import excursion_proxy_samples


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--R", type=float, default=0.1)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--centers", type=int, default=100)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()

    s = excursion_proxy_samples(args.eps, args.R, args.K, BmConfig(), args.centers,
                                rng=np.random.default_rng(args.seed))
    proxy = np.array([x.proxy for x in s])
    hit = np.array([x.hit_time for x in s])
    ok = hit > 0
    print(f"centers: {len(s)}  mean proxy {proxy.mean():.3f}  mean hitting time {hit.mean():.3f}")
    print(f"ratio of means {proxy.mean() / hit.mean():.3f}  "
          f"mean of ratios {np.mean(proxy[ok] / hit[ok]):.3f}")
    print(f"max proxy {proxy.max():.3f}  max hitting time {hit.max():.3f}")


if __name__ == "__main__":
    main()
