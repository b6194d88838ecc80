"""Simple-random-walk side of the excursion machinery.

Everything here lives on the scale indices 0..K alone: the walk starts at 1,
is stopped at 0 and is reflected at K (the innermost ball).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .oracles import a_thresholds, one_point_exact

LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class ExcursionSummary:
    max_scale: int
    down_crossings: np.ndarray  # index l counts l -> l-1 steps
    length: int


@dataclass(frozen=True)
class AEventSpec:
    n: int
    K: int
    delta: float
    thresholds: tuple[tuple[int, int, int], ...]

    @classmethod
    def build(cls, n: int, K: int, delta: float) -> "AEventSpec":
        return cls(n=n, K=K, delta=delta, thresholds=tuple(a_thresholds(n, K, delta)))

    def exact(self) -> float:
        return one_point_exact(self.n, self.K, self.delta)[0]


@numba.njit(cache=True)
def _walk_excursion(K, rng, downs):
    s = 1
    top = 1
    steps = 0
    while s != 0:
        if s == K or rng.random() < 0.5:
            if s == K:
                downs[s] += 1
                s -= 1
            else:
                s += 1
                if s > top:
                    top = s
        else:
            downs[s] += 1
            s -= 1
        steps += 1
    return top, steps


@numba.njit(cache=True)
def _walk_many(K, count, rng):
    tops = np.empty(count, np.int64)
    lengths = np.empty(count, np.int64)
    downs = np.zeros((count, K + 1), np.int64)
    for i in range(count):
        tops[i], lengths[i] = _walk_excursion(K, rng, downs[i])
    return tops, downs, lengths


def sample_excursion(K: int, rng: np.random.Generator) -> ExcursionSummary:
    """One SRW excursion 1 -> 0, reflected at K."""
    if K < 2:
        raise ValueError("K must be >= 2")
    tops, downs, lengths = _walk_many(K, 1, rng)
    return ExcursionSummary(int(tops[0]), downs[0], int(lengths[0]))


def sample_excursions(K: int, count: int, rng: np.random.Generator):
    """Batch of excursions: (max_scale, down_crossings, length) arrays."""
    if K < 2:
        raise ValueError("K must be >= 2")
    return _walk_many(K, int(count), rng)


@numba.njit(cache=True)
def _down_count(m, K, n_exc, rng):
    downs = np.zeros(K + 1, np.int64)
    for _ in range(n_exc):
        _walk_excursion(K, rng, downs)
    return downs[m]


def count_down_crossings(m: int, K: int, n_exc: int, rng: np.random.Generator) -> int:
    """Total m -> m-1 steps over n_exc independent excursions."""
    if not (1 <= m <= K) or K < 2:
        raise ValueError("need 1 <= m <= K, K >= 2")
    return int(_down_count(m, K, int(n_exc), rng))


def bern_geom_pmf(m: int, k: int) -> float:
    """P(N = k) for N = Bernoulli(1/m) x geometric(1/m) on {1, 2, ...}."""
    if m < 2 or k < 0:
        raise ValueError("need m >= 2 and k >= 0")
    q = 1.0 / m
    if k == 0:
        return 1.0 - q
    return q * q * (1.0 - q) ** (k - 1)


def sample_geometric_half(rng: np.random.Generator, size) -> np.ndarray:
    """Geometric(1/2) on {0, 1, ...} by inversion."""
    u = 1.0 - rng.random(size)  # (0, 1]
    return np.floor(np.log(u) / LOG_HALF).astype(np.int64)


def sample_N(n: int, rng: np.random.Generator, size=None):
    """Draw(s) of the number of up-steps before the n-th down-step: NB(n, 1/2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    draws = sample_geometric_half(rng, shape + (n,)).sum(axis=-1)
    return int(draws) if size is None else draws


@numba.njit(cache=True)
def _a_event_walk(K, args, bounds, rng):
    # args/bounds indexed by scale, args[l] = 0 for unconstrained scales
    downs = np.zeros(K + 1, np.int64)
    ups = np.zeros(K + 1, np.int64)
    pending = 0
    for l in range(K + 1):
        if args[l] > 0:
            pending += 1
    s = 1
    while pending > 0:
        if s == 0:
            s = 1
            continue
        if s == K:
            s = K - 1
            continue
        if rng.random() < 0.5:
            if downs[s] < args[s]:
                ups[s] += 1
                if ups[s] > bounds[s]:
                    return False
            s += 1
        else:
            if downs[s] < args[s]:
                downs[s] += 1
                if downs[s] == args[s]:
                    pending -= 1
            s -= 1
    return True


def a_event_mc(spec: AEventSpec, reps: int, rng: np.random.Generator, mode: str = "direct"):
    """Monte Carlo estimate of P(A^x) with a 95% normal-approximation half-width.

    ``mode="direct"`` draws each N_l(arg_l) from NB(arg_l, 1/2); ``mode="walk"``
    runs the full scale walk and counts steps.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not spec.thresholds:
        return 1.0, 0.0
    if mode == "direct":
        ok = np.ones(reps, dtype=bool)
        for _, arg, bound in spec.thresholds:
            if arg == 0:
                continue
            ok &= rng.negative_binomial(arg, 0.5, size=reps) <= bound
        hits = int(ok.sum())
    elif mode == "walk":
        args = np.zeros(spec.K + 1, np.int64)
        bounds = np.zeros(spec.K + 1, np.int64)
        for l, arg, bound in spec.thresholds:
            args[l], bounds[l] = arg, bound
        hits = sum(bool(_a_event_walk(spec.K, args, bounds, rng)) for _ in range(reps))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    p = hits / reps
    return p, 1.96 * math.sqrt(p * (1.0 - p) / reps)
