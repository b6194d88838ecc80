"""Closed-form and numerically exact predictions.

Green's function of the torus, first moments of hitting and exit times,
large-deviation rate functions, the deterministic budgets, exact A-event
probabilities and the h-transformed excursion counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .torus import torus_delta, torus_distance

TWO_OVER_PI = 2.0 / math.pi
EWALD_ETA = 1.0 / (4.0 * math.pi)


def ceil_frac(x: float) -> int:
    """Ceiling that ignores float noise such as 0.3 * 10 = 3.0000000000000004."""
    return math.ceil(round(x, 9))


# --------------------------------------------------------------------------
# Green's function


@dataclass(frozen=True)
class GreenValue:
    g: float
    f: float
    tol: float


def _ewald_cutoffs(tol: float, eta: float) -> tuple[int, int]:
    # reciprocal terms decay like exp(-4 pi^2 eta k^2), image terms like exp(-n^2 / 4 eta)
    log_tol = math.log(1.0 / tol) + 5.0
    k_max = int(math.ceil(math.sqrt(log_tol / (4.0 * math.pi**2 * eta)))) + 1
    n_max = int(math.ceil(math.sqrt(4.0 * eta * log_tol) + 0.5)) + 1
    return k_max, n_max


def green_array(du, dv, tol: float = 1e-12, eta: float = EWALD_ETA) -> np.ndarray:
    """G(z) = sum_{k != 0} exp(2 pi i k.z) / |2 pi k|^2 at displacements z = (du, dv).

    Ewald splitting of 1/|p|^2 = int_0^inf exp(-t |p|^2) dt at t = eta: the tail
    stays in Fourier space, the head is Poisson-summed into exponential
    integrals over the image lattice.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    du = (du + 0.5) % 1.0 - 0.5
    dv = (dv + 0.5) % 1.0 - 0.5
    k_max, n_max = _ewald_cutoffs(tol, eta)

    recip = np.zeros(np.broadcast(du, dv).shape)
    for a in range(0, k_max + 1):
        for b in range(-k_max, k_max + 1):
            # each (a, b) with a > 0, or a == 0 and b > 0, stands for itself and -(a, b)
            if a == 0 and b <= 0:
                continue
            k2 = a * a + b * b
            w = 2.0 * math.exp(-4.0 * math.pi**2 * eta * k2) / (4.0 * math.pi**2 * k2)
            if w < tol * 1e-3:
                continue
            recip += w * np.cos(2.0 * math.pi * (a * du + b * dv))

    real = np.zeros_like(recip)
    for a in range(-n_max, n_max + 1):
        for b in range(-n_max, n_max + 1):
            r2 = (du + a) ** 2 + (dv + b) ** 2
            real += special.exp1(r2 / (4.0 * eta))
    return recip + real / (4.0 * math.pi) - eta


def green_value(x, y, tol: float = 1e-12) -> GreenValue:
    """Green's function G_x(y) with Delta G_x = 1 - delta_x and its bounded remainder.

    ``f = g + ln(d)/(2 pi)`` is the part left after removing the logarithmic
    singularity, g ~ -ln(d)/(2 pi) as y -> x.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = torus_distance(x, y)
    if d == 0.0:
        raise ZeroDivisionError("Green's function is singular at x = y")
    du, dv = torus_delta(y, x)
    g = float(green_array(du, dv, tol))
    return GreenValue(g=g, f=g + math.log(d) / (2.0 * math.pi), tol=tol)


def green_remainder_array(du, dv, tol: float = 1e-12) -> np.ndarray:
    du = np.asarray(du, float)
    dv = np.asarray(dv, float)
    g = green_array(du, dv, tol)
    wu = np.abs((du + 0.5) % 1.0 - 0.5)
    wv = np.abs((dv + 0.5) % 1.0 - 0.5)
    return g + np.log(np.hypot(wu, wv)) / (2.0 * math.pi)


def green_remainder_at_zero(tol: float = 1e-14, eta: float = EWALD_ETA) -> float:
    """lim_{z->0} G(z) + ln|z|/(2 pi)."""
    k_max, n_max = _ewald_cutoffs(tol, eta)
    val = (-np.euler_gamma - math.log(1.0 / (4.0 * eta))) / (4.0 * math.pi)
    for a in range(-k_max, k_max + 1):
        for b in range(-k_max, k_max + 1):
            if a or b:
                k2 = a * a + b * b
                val += math.exp(-4.0 * math.pi**2 * eta * k2) / (4.0 * math.pi**2 * k2)
    for a in range(-n_max, n_max + 1):
        for b in range(-n_max, n_max + 1):
            if a or b:
                val += special.exp1((a * a + b * b) / (4.0 * eta)) / (4.0 * math.pi)
    return val - eta


def hitting_remainder(d: float, tol: float = 1e-12) -> float:
    """Limit as r -> 0 of E_y[tau_{B_r(x)}] - ln(d/r)/pi for y = x + (d, 0)."""
    f_d = float(green_remainder_array(d, 0.0, tol))
    return 2.0 * (green_remainder_at_zero(tol) - f_d)


# --------------------------------------------------------------------------
# hitting and exit times


def hit_time_prediction(d: float, r: float) -> float:
    if not (0.0 < r < d <= math.sqrt(0.5) + 1e-12):
        raise ValueError(f"need 0 < r < d <= sqrt(2)/2, got d={d}, r={r}")
    return math.log(d / r) / math.pi


def exit_time_expectation(r: float, d: float) -> float:
    if not (0.0 <= d < r < 0.5):
        raise ValueError(f"need 0 <= d < r < 1/2, got r={r}, d={d}")
    return (r * r - d * d) / 2.0


# --------------------------------------------------------------------------
# rate functions


def rate_geo(a: float) -> float:
    """Cramer rate function of geometric(1/2) on {0, 1, ...}."""
    if a < 0:
        raise ValueError("rate_geo is defined for a >= 0")
    if a == 0:
        return math.log(2.0)
    return a * math.log(a) - (1.0 + a) * math.log((1.0 + a) / 2.0)


def bern_geom_log_mgf(theta: float, m: int) -> float:
    """log E exp(theta N), N = Bernoulli(1/m) x geometric(1/m) on {1, 2, ...}."""
    q = 1.0 / m
    e = math.exp(theta)
    denom = 1.0 - (1.0 - q) * e
    if denom <= 0:
        return math.inf
    return math.log((1.0 - q) + q * q * e / denom)


def _bern_geom_mgf_slope(theta: float, m: int) -> float:
    q = 1.0 / m
    e = math.exp(theta)
    denom = 1.0 - (1.0 - q) * e
    mgf = (1.0 - q) + q * q * e / denom
    return q * q * e / denom**2 / mgf


def rate_bern_geom(m: int, a: float) -> float:
    """Legendre transform of the Bernoulli(1/m) x geometric(1/m) log-mgf at a."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if a < 0:
        raise ValueError("a must be >= 0")
    if a == 0:
        return -math.log(1.0 - 1.0 / m)
    if a == 1:
        return 0.0
    theta_max = math.log(m / (m - 1.0))
    if a > 1:
        # the slope blows up at theta_max; approach the pole only as far as needed
        lo, gap = 0.0, 0.5 * theta_max
        while _bern_geom_mgf_slope(theta_max - gap, m) < a:
            gap *= 0.5
            if gap < 1e-300:
                raise OverflowError("rate argument too large")
        hi = theta_max - gap
    else:
        lo, hi = -1.0, 0.0
        while _bern_geom_mgf_slope(lo, m) > a:
            lo *= 2.0
    theta = optimize.brentq(lambda s: _bern_geom_mgf_slope(s, m) - a, lo, hi, xtol=1e-14, rtol=1e-15)
    return theta * a - bern_geom_log_mgf(theta, m)


def j_squared_rate_limit(j: int) -> float:
    if j < 2:
        raise ValueError("j must be >= 2")
    return j * j * rate_geo((1.0 - 1.0 / j) ** 2)


# --------------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class ExperimentParams:
    eps: float
    delta: float
    K: int
    R: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError(f"delta must lie in [0, 1/2), got {self.delta}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be an integer >= 1, got {self.K}")

    @property
    def first_scale(self) -> int:
        return ceil_frac(self.delta * self.K)


@dataclass(frozen=True)
class Budgets:
    t_eps: float
    n_eps: float
    frak_n: np.ndarray
    frak_t: float


def budgets(p: ExperimentParams, j_max: int = 4) -> Budgets:
    log_eps = math.log(p.eps)
    t_eps = (1.0 + p.delta) * TWO_OVER_PI * log_eps**2
    n_eps = -(1.0 + p.delta / 2.0) * 2.0 * p.K * log_eps
    frak_n = np.array([-2.0 * p.K * (1.0 - p.delta) ** j * log_eps for j in range(j_max + 1)])
    frak_t = (1.0 - p.delta) ** 4 * TWO_OVER_PI * log_eps**2
    return Budgets(t_eps=t_eps, n_eps=n_eps, frak_n=frak_n, frak_t=frak_t)


# --------------------------------------------------------------------------
# A-events


def a_thresholds(n: int, K: int, delta: float) -> list[tuple[int, int, int]]:
    """(l, argument, bound) for the scales l = ceil(delta K) .. K-1.

    The argument n (1 - l/K)^2 is rounded half-up and the bound
    n (1 - (l+1)/K)^2 floored, both in exact integer arithmetic.
    """
    if n < 1 or K < 2:
        raise ValueError("need n >= 1 and K >= 2")
    first = max(1, ceil_frac(delta * K))
    out = []
    for l in range(first, K):
        arg = (2 * n * (K - l) ** 2 + K * K) // (2 * K * K)
        bound = n * (K - l - 1) ** 2 // (K * K)
        out.append((l, arg, bound))
    return out


def nb_log_cdf(bound: int, m: int) -> float:
    """log P(sum of m geometric(1/2) on {0,1,...} <= bound)."""
    if m == 0:
        return 0.0 if bound >= 0 else -math.inf
    if bound < 0:
        return -math.inf
    val = float(stats.nbinom.logcdf(bound, m, 0.5))
    if val > -700.0:
        return val
    # deep lower tail: the summands C(m-1+k, k) 2^-(m+k) grow with k up to the
    # bound, so sum backwards from the last one until the remainder is negligible
    k = np.arange(bound, -1, -1, dtype=float)
    ratios = 2.0 * k[:-1] / (m + k[:-1] - 1.0)   # t_{k-1} / t_k
    logs = np.concatenate([[0.0], np.cumsum(np.log(ratios))])
    logs = logs[logs > -745.0]
    log_last = (special.gammaln(m + bound) - special.gammaln(bound + 1) - special.gammaln(m)
                - (m + bound) * math.log(2.0))
    return float(log_last + special.logsumexp(logs))


def one_point_exact(n: int, K: int, delta: float) -> tuple[float, float]:
    """(P(A^x), log P(A^x)); empty scale range gives probability one."""
    logp = sum(nb_log_cdf(bound, arg) for _, arg, bound in a_thresholds(n, K, delta))
    return math.exp(logp), logp


def two_point_bound(i: int, p: ExperimentParams) -> float:
    if not (p.first_scale - 2 <= i <= p.K):
        raise ValueError(f"i={i} outside [{p.first_scale - 2}, {p.K}]")
    return p.eps ** (4.0 - 2.01 * p.delta - 2.0 * (i + 1) / p.K)


# --------------------------------------------------------------------------
# h-transformed chain


def conditioned_transitions(K: int) -> np.ndarray:
    """Transition matrix on {0..K} of SRW conditioned to hit 0 before K."""
    if K < 2:
        raise ValueError("K must be >= 2")
    h = (K - np.arange(K + 1)) / K
    P = np.zeros((K + 1, K + 1))
    P[0, 0] = 1.0
    P[K, K] = 1.0
    for j in range(1, K):
        P[j, j + 1] = 0.5 * h[j + 1] / h[j]
        P[j, j - 1] = 0.5 * h[j - 1] / h[j]
    return P


def conditioned_excursion_expectations(K: int) -> np.ndarray:
    """Expected number of l -> l+1 steps, l = 0..K-1, from 1 under the conditioned chain."""
    P = conditioned_transitions(K)
    Q = P[1:K, 1:K]
    A = np.eye(K - 1) - Q.T
    e1 = np.zeros(K - 1)
    e1[0] = 1.0
    occ = np.linalg.solve(A, e1)
    if np.max(np.abs(A @ occ - e1)) > 1e-12:
        raise ArithmeticError("occupation solve residual above 1e-12")
    out = np.zeros(K)
    for l in range(1, K):
        out[l] = occ[l - 1] * P[l, l + 1]
    return out
