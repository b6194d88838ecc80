"""epsilon-cover time of the torus by a single Brownian path.

Two families of balls are tracked on the same path: radius eps on the lattice
L_eps and radius eps/10 on L_{eps/10}.  Every eps-ball contains an
(eps/10)-ball, so the largest hitting time over the first family is bounded by
the largest over the second; the pair is reported as a bracket for the cover
time.

Uncovered balls are stored per lattice cell with occupancy counts over square
blocks of cells.  The step size is driven by a lower bound D on the distance to
the nearest uncovered ball; D is refreshed by a ring search over blocks and
decreased by the distance travelled in between, so most steps cost O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .bm import BmConfig, run_excursions, StopRule
from .torus import (
    MAX_DISTANCE,
    Lattice,
    TorusPoint,
    make_lattice,
    make_scale_ladder,
)

MAX_EPS = 0.2
SKIP_EXPONENT = 30.0   # bridge probabilities below e^-30 are ignored
CHECK_FACTOR = 15.0    # candidate balls lie within sqrt(15 h) of the step
SEARCH_CAP = 0.25


@dataclass
class CoverResult:
    eps: float
    lattice_mesh: float
    lattice: Lattice = field(repr=False)
    times: np.ndarray = field(repr=False)        # per L_eps ball, lattice order
    fine_lattice: Lattice = field(repr=False)
    fine_times: np.ndarray = field(repr=False)   # per L_{eps/10} ball
    t_cover: float = 0.0
    argmax: TorusPoint = TorusPoint(0.0, 0.0)
    ratio: float = 0.0
    bracket_lo: float = 0.0
    bracket_hi: float = 0.0
    steps: int = 0
    trivial: bool = False

    @property
    def per_ball_times(self) -> dict[TorusPoint, float]:
        return {self.lattice.point(k): float(t) for k, t in enumerate(self.times)}


def _block_size(side: int, target: int) -> int:
    for b in range(min(target, side), 0, -1):
        if side % b == 0:
            return b
    return 1


@numba.njit(cache=True, inline="always")
def _mi(z):
    return z - math.floor(z + 0.5)


@numba.njit(cache=True)
def _nearest(x, y, side, mesh, rad, hit, bs, bcount, cap):
    """Lower bound on the boundary distance to the nearest uncovered ball."""
    nb = side // bs
    L = bs * mesh
    ci = int(math.floor(x / mesh)) % side
    cj = int(math.floor(y / mesh)) % side
    bi0 = ci // bs
    bj0 = cj // bs
    best = cap
    kmax = nb // 2 + 1
    for k in range(kmax + 1):
        if (k - 1) * L - rad >= best:
            break
        for di in range(-k, k + 1):
            for dj in range(-k, k + 1):
                if max(abs(di), abs(dj)) != k:
                    continue
                bi = (bi0 + di) % nb
                bj = (bj0 + dj) % nb
                if bcount[bi * nb + bj] == 0:
                    continue
                for a in range(bi * bs, bi * bs + bs):
                    du = _mi(x - a * mesh)
                    if abs(du) - rad >= best:
                        continue
                    for b in range(bj * bs, bj * bs + bs):
                        idx = a * side + b
                        if hit[idx]:
                            continue
                        d = math.hypot(du, _mi(y - b * mesh)) - rad
                        if d < best:
                            best = d
    if best < 0.0:
        best = 0.0
    return best


@numba.njit(cache=True)
def _mark(idx, tt, side, bs, hit, times, bcount):
    hit[idx] = True
    times[idx] = tt
    nb = side // bs
    a = idx // side
    b = idx % side
    bcount[(a // bs) * nb + b // bs] -= 1


@numba.njit(cache=True)
def _check(x, y, du, dv, h, t, reach, side, mesh, rad, hit, times, bs, bcount,
           bridge, rng, new_hits):
    """Test all uncovered balls near the step for endpoint or bridge hits."""
    nb = side // bs
    w = int(math.ceil((rad + reach) / mesh)) + 1
    ci = int(math.floor(x / mesh + 0.5))
    cj = int(math.floor(y / mesh + 0.5))
    ilo, jlo, n_span = ci - w, cj - w, 2 * w + 1
    if n_span > side:
        ilo, jlo, n_span = 0, 0, side
    n_new = 0
    for ia in range(ilo, ilo + n_span):
        a = ia % side
        ru = _mi(x - a * mesh)
        if abs(ru) > rad + reach:
            continue
        for ib in range(jlo, jlo + n_span):
            b = ib % side
            idx = a * side + b
            if hit[idx]:
                continue
            if bcount[(a // bs) * nb + b // bs] == 0:
                continue
            rv = _mi(y - b * mesh)
            d0 = math.hypot(ru, rv) - rad
            if d0 > reach:
                continue
            d1 = math.hypot(ru + du, rv + dv) - rad
            f = 2.0
            if d0 <= 0.0:
                f = 0.0
            elif d1 <= 0.0:
                f = d0 / (d0 - d1)
            elif bridge:
                p = math.exp(-2.0 * d0 * d1 / h)
                if p > 1e-16 and rng.random() < p:
                    f = d0 / (d0 + d1)
            if f <= 1.0:
                _mark(idx, t + f * h, side, bs, hit, times, bcount)
                new_hits[n_new] = idx
                n_new += 1
                if n_new == new_hits.shape[0]:
                    return n_new
    return n_new


@numba.njit(cache=True)
def _propagate(bidx, tt, side2, mesh2, side1, mesh1, rad_in, hit1, times1, bs1, bcount1):
    """Mark every coarse ball containing the fine ball ``bidx`` as hit at tt."""
    bu = (bidx // side2) * mesh2
    bv = (bidx % side2) * mesh2
    ci = int(math.floor(bu / mesh1 + 0.5))
    cj = int(math.floor(bv / mesh1 + 0.5))
    w = int(math.ceil(rad_in / mesh1)) + 1
    ilo, jlo, n_span = ci - w, cj - w, 2 * w + 1
    if n_span > side1:
        ilo, jlo, n_span = 0, 0, side1
    for ia in range(ilo, ilo + n_span):
        a = ia % side1
        for ib in range(jlo, jlo + n_span):
            b = ib % side1
            idx = a * side1 + b
            if hit1[idx]:
                if times1[idx] > tt:
                    times1[idx] = tt
                continue
            if math.hypot(_mi(bu - a * mesh1), _mi(bv - b * mesh1)) <= rad_in + 1e-12:
                _mark(idx, tt, side1, bs1, hit1, times1, bcount1)


@numba.njit(cache=True)
def _cover_kernel(x, y, side1, mesh1, rad1, bs1, side2, mesh2, rad2, bs2,
                  h_max, c_step, h_min, bridge, rng, max_steps):
    n1 = side1 * side1
    n2 = side2 * side2
    hit1 = np.zeros(n1, np.bool_)
    hit2 = np.zeros(n2, np.bool_)
    times1 = np.full(n1, np.inf)
    times2 = np.full(n2, np.inf)
    nb1 = side1 // bs1
    nb2 = side2 // bs2
    bcount1 = np.full(nb1 * nb1, bs1 * bs1, np.int64)
    bcount2 = np.full(nb2 * nb2, bs2 * bs2, np.int64)
    new1 = np.empty(n1, np.int64)
    new2 = np.empty(n2, np.int64)
    left2 = n2
    t = 0.0

    # balls containing the start are hit at time zero
    _check(x, y, 0.0, 0.0, 1.0, 0.0, 0.0, side1, mesh1, rad1, hit1, times1, bs1, bcount1,
           False, rng, new1)
    k = _check(x, y, 0.0, 0.0, 1.0, 0.0, 0.0, side2, mesh2, rad2, hit2, times2, bs2, bcount2,
               False, rng, new2)
    for q in range(k):
        _propagate(new2[q], 0.0, side2, mesh2, side1, mesh1, rad1 - rad2, hit1, times1, bs1, bcount1)
    left2 -= k

    d_ref = -1.0
    moved_u = 0.0
    moved_v = 0.0
    steps = 0
    while left2 > 0:
        steps += 1
        if steps > max_steps:
            return times1, times2, -steps
        moved = math.hypot(moved_u, moved_v)
        if d_ref < 0.0 or d_ref - moved < 0.5 * d_ref:
            d_ref = min(_nearest(x, y, side1, mesh1, rad1, hit1, bs1, bcount1, SEARCH_CAP),
                        _nearest(x, y, side2, mesh2, rad2, hit2, bs2, bcount2, SEARCH_CAP))
            moved_u = 0.0
            moved_v = 0.0
            moved = 0.0
        D = d_ref - moved
        if D < 0.0:
            D = 0.0
        h = c_step * D * D
        if h > h_max:
            h = h_max
        if h < h_min:
            h = h_min
        sq = math.sqrt(h)
        du = sq * rng.standard_normal()
        dv = sq * rng.standard_normal()
        step = math.hypot(du, dv)
        if not (step < D and 2.0 * D * (D - step) > SKIP_EXPONENT * h):
            reach = step + math.sqrt(CHECK_FACTOR * h)
            _check(x, y, du, dv, h, t, reach, side1, mesh1, rad1, hit1, times1, bs1, bcount1,
                   bridge, rng, new1)
            k = _check(x, y, du, dv, h, t, reach, side2, mesh2, rad2, hit2, times2, bs2,
                       bcount2, bridge, rng, new2)
            for q in range(k):
                _propagate(new2[q], times2[new2[q]], side2, mesh2, side1, mesh1, rad1 - rad2,
                           hit1, times1, bs1, bcount1)
            left2 -= k
            if k > 0:
                d_ref = -1.0
        x = x + du
        y = y + dv
        x -= math.floor(x)
        y -= math.floor(y)
        moved_u += du
        moved_v += dv
        t += h
    return times1, times2, steps


def _trivial_result(eps: float, start: TorusPoint) -> CoverResult:
    lat = make_lattice(min(eps, 0.999))
    fine = make_lattice(min(eps / 10, 0.999))
    return CoverResult(eps=eps, lattice_mesh=lat.mesh, lattice=lat, times=np.zeros(len(lat)),
                       fine_lattice=fine, fine_times=np.zeros(len(fine)), t_cover=0.0,
                       argmax=lat.point(0), ratio=0.0, bracket_lo=0.0, bracket_hi=0.0,
                       trivial=True)


def estimate_cover_time(eps: float, cfg: BmConfig, start=None, rng=None,
                        block: int = 8, max_steps: int = 20_000_000_000) -> CoverResult:
    """Run one path until every (eps/10)-ball on L_{eps/10} has been hit.

    For eps >= sqrt(2)/2 every ball contains the whole torus and the result is
    the flagged trivial one (all times 0).
    """
    if eps >= MAX_DISTANCE:
        return _trivial_result(eps, TorusPoint(0.0, 0.0) if start is None else TorusPoint(*start))
    if not 0.0 < eps < MAX_EPS:
        raise ValueError(f"eps must lie in (0, {MAX_EPS}), got {eps}")
    rng = cfg.rng() if rng is None else rng
    start = TorusPoint(0.0, 0.0) if start is None else TorusPoint(*start)
    lat = make_lattice(eps)
    fine = make_lattice(eps / 10.0)
    bs1 = _block_size(lat.side, block)
    bs2 = _block_size(fine.side, block)
    times1, times2, steps = _cover_kernel(
        start.u, start.v, lat.side, lat.mesh, eps, bs1, fine.side, fine.mesh, eps / 10.0, bs2,
        cfg.h_max, cfg.c_step, cfg.h_min, cfg.bridge_correction, rng, max_steps)
    if steps < 0:
        raise RuntimeError(f"cover run exceeded {max_steps} steps")
    k = int(np.argmax(times1))
    t_cover = float(times1[k])
    return CoverResult(
        eps=eps, lattice_mesh=lat.mesh, lattice=lat, times=times1, fine_lattice=fine,
        fine_times=times2, t_cover=t_cover, argmax=lat.point(k),
        ratio=t_cover / math.log(eps) ** 2, bracket_lo=t_cover,
        bracket_hi=float(np.max(times2)), steps=int(steps))


# --------------------------------------------------------------------------
# excursion-count proxy


@dataclass(frozen=True)
class ProxySample:
    center: TorusPoint
    deep_index: int        # index of the first excursion reaching scale K
    proxy: float           # deep_index * (1/pi) ln(r_0/r_1)
    hit_time: float        # actual first time the eps-ball is reached


def excursion_proxy_samples(eps: float, R: float, K: int, cfg: BmConfig, center_sample: int,
                            rng=None, start=None) -> list[ProxySample]:
    """Per-center excursion-count proxies and actual eps-ball hitting times.

    All centers are followed along one path, which stops once every eps-ball
    has been reached.
    """
    if center_sample < 1:
        raise ValueError("center_sample must be >= 1")
    ladder = make_scale_ladder(R, eps, K)
    rng = cfg.rng() if rng is None else rng
    pts = rng.random((center_sample, 2))
    centers = [TorusPoint(*p) for p in pts]
    if start is None:
        start = TorusPoint(*rng.random(2))
    traces = run_excursions(centers, ladder, StopRule.all_hit(), cfg, start=start, rng=rng)
    unit = math.log(ladder.radii[0] / ladder.radii[1]) / math.pi
    out = []
    for c, tr in zip(centers, traces):
        T = tr.first_deep_hit
        ht = tr.hit_time
        if T is None or ht is None:
            # start already inside the innermost ball of this center
            T, ht = 0, 0.0
        out.append(ProxySample(center=c, deep_index=T, proxy=T * unit, hit_time=ht))
    return out


def excursion_cover_proxy(eps: float, R: float, K: int, cfg: BmConfig, center_sample: int,
                          rng=None) -> float:
    """Max over random centers of (first deep excursion index) * (1/pi) ln(r_0/r_1)."""
    return max(s.proxy for s in excursion_proxy_samples(eps, R, K, cfg, center_sample, rng))
