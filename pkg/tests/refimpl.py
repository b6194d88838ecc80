"""Independent reference implementations shared by the test modules.

These are slow, exact or brute-force versions of quantities the package
computes by other means; the package is used only to enumerate instances.
"""

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from covertime_lab.oracles import a_thresholds, ceil_frac


def green_reference(du, dv, sigma=1e-3):
    """Gaussian-regularised reciprocal sum, extrapolated to sigma -> 0.

    G_sigma is G smoothed by the heat kernel at time sigma/(4 pi^2); away from
    the singularity d/d sigma G_sigma = 1/(4 pi^2), so G_sigma is affine in
    sigma and two values determine the limit.
    """
    kmax = int(math.ceil(math.sqrt(40.0 / sigma)))
    k = np.arange(-kmax, kmax + 1)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    ksq = (k1**2 + k2**2).astype(float)
    ksq[kmax, kmax] = np.inf
    vals = []
    for s in (sigma, 2 * sigma):
        w = np.exp(-s * ksq) / (4 * math.pi**2 * ksq)
        vals.append(np.sum(w * np.cos(2 * math.pi * (k1 * du + k2 * dv))))
    return 2 * vals[0] - vals[1]


@lru_cache(maxsize=None)
def stopped_sequence_probability(m: int, b: int) -> Fraction:
    """P(at most b up-moves before the m-th down-move), by listing every
    stopped up/down sequence of a fair coin."""
    if m == 0:
        return Fraction(1)
    total = Fraction(0)
    stack = [(0, 0, 0)]  # (downs, ups, length)
    while stack:
        d, u, n = stack.pop()
        if d == m:
            total += Fraction(1, 2**n)
            continue
        if u == b + 1:
            continue
        stack.append((d + 1, u, n + 1))
        stack.append((d, u + 1, n + 1))
    return total


def recursion_probability(m: int, b: int) -> Fraction:
    # P(m, b) = P(m-1, b)/2 + P(m, b-1)/2
    P = [[Fraction(0)] * (b + 2) for _ in range(m + 1)]
    for bb in range(b + 2):
        P[0][bb] = Fraction(1) if bb >= 1 else Fraction(0)
    for mm in range(1, m + 1):
        for bb in range(1, b + 2):
            P[mm][bb] = (P[mm - 1][bb] + P[mm][bb - 1]) / 2
    return P[m][b + 1]


def budget_instances(max_total=20):
    for K in range(2, 21):
        for delta in (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45):
            if ceil_frac(delta * K) > K - 1:
                continue
            for n in range(1, 400):
                thr = a_thresholds(n, K, delta)
                if sum(a for _, a, _ in thr) > max_total:
                    break
                yield n, K, delta, thr
