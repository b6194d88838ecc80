"""Brownian motion on the torus with adaptive Euler steps.

Steps are h = clip(c_step * d_near^2, h_min, h_max), where d_near is the
distance to the nearest monitored circle.  Crossings are detected at the
step endpoints and, with ``bridge_correction``, through the Brownian-bridge
probability exp(-2 d0 d1 / h) that the path touched the circle in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .torus import ScaleLadder, TorusPoint, torus_delta, torus_distance

DEFAULT_MAX_STEPS = 5_000_000_000


@dataclass(frozen=True)
class BmConfig:
    h_max: float = 1e-4
    c_step: float = 0.1
    bridge_correction: bool = True
    rng_seed: int = 0
    h_min: float = 1e-8

    def __post_init__(self) -> None:
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if not 0.0 < self.c_step <= 1.0:
            raise ValueError("c_step must lie in (0, 1]")
        if not 0.0 < self.h_min <= self.h_max:
            raise ValueError("need 0 < h_min <= h_max")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, inline="always")
def _wrap(z):
    return z - math.floor(z + 0.5)


@numba.njit(cache=True, inline="always")
def _step_size(d, c_step, h_min, h_max):
    h = c_step * d * d
    if h > h_max:
        return h_max
    if h < h_min:
        return h_min
    return h


@numba.njit(cache=True)
def _exit_kernel(z0u, z0v, r, n, h_max, c_step, h_min, bridge, rng):
    out = np.empty(n)
    for i in range(n):
        zu, zv, t = z0u, z0v, 0.0
        while True:
            d0 = r - math.hypot(zu, zv)
            if d0 <= 0.0:
                break
            h = _step_size(d0, c_step, h_min, h_max)
            sq = math.sqrt(h)
            nu = zu + sq * rng.standard_normal()
            nv = zv + sq * rng.standard_normal()
            d1 = r - math.hypot(nu, nv)
            if d1 <= 0.0:
                t += h * d0 / (d0 - d1)
                break
            if bridge:
                p = math.exp(-2.0 * d0 * d1 / h)
                if p > 1e-16 and rng.random() < p:
                    t += h * d0 / (d0 + d1)
                    break
            zu, zv, t = nu, nv, t + h
        out[i] = t
    return out


@numba.njit(cache=True)
def _hit_kernel(z0u, z0v, radii, n, h_max, c_step, h_min, bridge, rng):
    # radii sorted decreasingly; one path records the first hit of each
    nr = radii.shape[0]
    out = np.empty((n, nr))
    for i in range(n):
        zu, zv, t = _wrap(z0u), _wrap(z0v), 0.0
        j = 0
        rho = math.hypot(zu, zv)
        while j < nr and rho <= radii[j]:
            out[i, j] = 0.0
            j += 1
        while j < nr:
            d0 = rho - radii[j]
            h = _step_size(d0, c_step, h_min, h_max)
            sq = math.sqrt(h)
            nu = _wrap(zu + sq * rng.standard_normal())
            nv = _wrap(zv + sq * rng.standard_normal())
            rho1 = math.hypot(nu, nv)
            d1 = rho1 - radii[j]
            if d1 <= 0.0:
                while j < nr and rho1 <= radii[j]:
                    a = rho - radii[j]
                    out[i, j] = t + h * a / (a - (rho1 - radii[j]))
                    j += 1
            elif bridge:
                p = math.exp(-2.0 * d0 * d1 / h)
                if p > 1e-16 and rng.random() < p:
                    out[i, j] = t + h * d0 / (d0 + d1)
                    j += 1
            zu, zv, rho, t = nu, nv, rho1, t + h
    return out


@numba.njit(cache=True)
def _grow_f(a, n):
    b = np.empty(n, a.dtype)
    b[: a.shape[0]] = a
    return b


@numba.njit(cache=True)
def _gather(x, y, rings, cell_n, cell_start, cell_items, out):
    """Indices (ascending) of the centers hashed within ``rings`` cells of (x, y)."""
    if 2 * rings + 1 >= cell_n:
        for k in range(out.shape[0]):
            out[k] = k
        return out.shape[0]
    gi = int(x * cell_n) % cell_n
    gj = int(y * cell_n) % cell_n
    n = 0
    for di in range(-rings, rings + 1):
        for dj in range(-rings, rings + 1):
            cell = ((gi + di) % cell_n) * cell_n + (gj + dj) % cell_n
            for k in range(cell_start[cell], cell_start[cell + 1]):
                out[n] = cell_items[k]
                n += 1
    # fixed order, so hashed and brute-force runs consume random numbers alike
    for a in range(1, n):
        v = out[a]
        b = a - 1
        while b >= 0 and out[b] > v:
            out[b + 1] = out[b]
            b -= 1
        out[b + 1] = v
    return n


@numba.njit(cache=True)
def _excursion_kernel(
    cu, cv, radii, su, sv,
    cell_n, cell_start, cell_items,
    stop_kind, stop_center, stop_n, stop_t, quota,
    h_max, c_step, h_min, bridge, rng, max_steps,
):
    nc = cu.shape[0]
    K = radii.shape[0] - 1
    r0 = radii[0]
    outer = np.empty(nc, np.int64)   # monitored outer circle, -1 if none
    inner = np.empty(nc, np.int64)   # monitored inner circle, K+1 if none
    last = np.full(nc, -1, np.int64)
    seen1 = np.zeros(nc, np.bool_)
    deep = np.zeros(nc, np.bool_)
    completed = np.zeros(nc, np.int64)
    downs = np.zeros((nc, K + 1), np.int64)

    for c in range(nc):
        rho = math.hypot(_wrap(su - cu[c]), _wrap(sv - cv[c]))
        if rho >= radii[0]:
            outer[c], inner[c] = -1, 0
        elif rho <= radii[K]:
            outer[c], inner[c] = K, K + 1
        else:
            j = 0
            while radii[j + 1] >= rho:
                j += 1
            outer[c], inner[c] = j, j + 1

    cap = 1024
    ev_c = np.empty(cap, np.int64)
    ev_s = np.empty(cap, np.int64)
    ev_d = np.empty(cap, np.int64)
    ev_t = np.empty(cap)
    ev_u = np.empty(cap)
    ev_v = np.empty(cap)
    n_ev = 0

    x, y, t = su, sv, 0.0
    steps = 0
    cand = np.arange(nc)
    while True:
        # stop rules
        if stop_kind == 0:
            if completed[stop_center] >= stop_n:
                break
        elif stop_kind == 1:
            if t >= stop_t:
                break
        elif stop_kind == 2:
            done = True
            for c in range(nc):
                if not deep[c]:
                    done = False
                    break
            if done:
                break
        else:
            done = True
            for c in range(nc):
                for l in range(1, K + 1):
                    if downs[c, l] < quota[l]:
                        done = False
                        break
                if not done:
                    break
            if done:
                break
        steps += 1
        if steps > max_steps:
            return -1, ev_c, ev_s, ev_d, ev_t, ev_u, ev_v, t, steps

        # centers whose circles may set the step size
        if cell_n > 0:
            n_cand = _gather(x, y, 1, cell_n, cell_start, cell_items, cand)
            d_near = 1.0 / cell_n - r0
        else:
            n_cand = nc
            d_near = 1.0

        for k in range(n_cand):
            c = cand[k]
            rho = math.hypot(_wrap(x - cu[c]), _wrap(y - cv[c]))
            if outer[c] >= 0:
                d = radii[outer[c]] - rho
                if d < d_near:
                    d_near = d
            if inner[c] <= K:
                d = rho - radii[inner[c]]
                if d < d_near:
                    d_near = d
        if d_near < 0.0:
            d_near = 0.0
        h = _step_size(d_near, c_step, h_min, h_max)
        sq = math.sqrt(h)
        du = sq * rng.standard_normal()
        dv = sq * rng.standard_normal()
        if cell_n > 0:
            # beyond this reach every bridge crossing probability is < e^-40
            reach = r0 + math.hypot(du, dv) + math.sqrt(20.0 * h)
            n_cand = _gather(x, y, int(reach * cell_n) + 1, cell_n, cell_start,
                             cell_items, cand)

        best_f = 2.0
        best_c = -1
        best_s = -1
        for k in range(n_cand):
            c = cand[k]
            zu = _wrap(x - cu[c])
            zv = _wrap(y - cv[c])
            rho0 = math.hypot(zu, zv)
            rho1 = math.hypot(zu + du, zv + dv)
            if outer[c] >= 0:
                rr = radii[outer[c]]
                a = rr - rho0
                b = rr - rho1
                f = 2.0
                if b <= 0.0:
                    f = a / (a - b) if a > 0.0 else 0.0
                elif bridge:
                    p = math.exp(-2.0 * a * b / h)
                    if p > 1e-16 and rng.random() < p:
                        f = a / (a + b)
                if f < best_f:
                    best_f, best_c, best_s = f, c, outer[c]
            if inner[c] <= K:
                rr = radii[inner[c]]
                a = rho0 - rr
                b = rho1 - rr
                f = 2.0
                if b <= 0.0:
                    f = a / (a - b) if a > 0.0 else 0.0
                elif bridge:
                    p = math.exp(-2.0 * a * b / h)
                    if p > 1e-16 and rng.random() < p:
                        f = a / (a + b)
                if f < best_f:
                    best_f, best_c, best_s = f, c, inner[c]

        if best_c < 0:
            x = x + du
            y = y + dv
            x -= math.floor(x)
            y -= math.floor(y)
            t += h
            continue

        # truncate the step at the first crossing and restart on the circle
        c = best_c
        s = best_s
        zu = _wrap(x - cu[c]) + best_f * du
        zv = _wrap(y - cv[c]) + best_f * dv
        rho = math.hypot(zu, zv)
        if rho > 0.0:
            zu *= radii[s] / rho
            zv *= radii[s] / rho
        x = cu[c] + zu
        y = cv[c] + zv
        x -= math.floor(x)
        y -= math.floor(y)
        t += best_f * h

        prev = last[c]
        direction = 1 if s == inner[c] else -1
        if seen1[c] and prev == s + 1:
            downs[c, prev] += 1
            if prev == 1:
                completed[c] += 1
        if s == 1:
            seen1[c] = True
        if s == K:
            deep[c] = True
        last[c] = s
        outer[c] = s - 1
        inner[c] = s + 1

        if n_ev == cap:
            cap *= 2
            ev_c = _grow_f(ev_c, cap)
            ev_s = _grow_f(ev_s, cap)
            ev_d = _grow_f(ev_d, cap)
            ev_t = _grow_f(ev_t, cap)
            ev_u = _grow_f(ev_u, cap)
            ev_v = _grow_f(ev_v, cap)
        ev_c[n_ev] = c
        ev_s[n_ev] = s
        ev_d[n_ev] = direction
        ev_t[n_ev] = t
        ev_u[n_ev] = x
        ev_v[n_ev] = y
        n_ev += 1

    return n_ev, ev_c, ev_s, ev_d, ev_t, ev_u, ev_v, t, steps


# --------------------------------------------------------------------------
# exit and hitting times


def _rng(cfg: BmConfig, rng):
    return cfg.rng() if rng is None else rng


def sample_exit_times(start, center, r: float, cfg: BmConfig, n: int, rng=None) -> np.ndarray:
    """n independent exit times of B_r(center) started at ``start``."""
    if not 0.0 < r < 0.5:
        raise ValueError("r must lie in (0, 1/2)")
    if torus_distance(start, center) >= r:
        raise ValueError("start must lie inside the ball")
    zu, zv = torus_delta(start, center)
    return _exit_kernel(zu, zv, float(r), int(n), cfg.h_max, cfg.c_step, cfg.h_min,
                        cfg.bridge_correction, _rng(cfg, rng))


def sample_exit_time(start, center, r: float, cfg: BmConfig, rng=None) -> float:
    return float(sample_exit_times(start, center, r, cfg, 1, rng)[0])


def sample_hit_times(start, center, radii, cfg: BmConfig, n: int, rng=None) -> np.ndarray:
    """First hitting times of B_r(center) for each r in ``radii``, shape (n, len(radii)).

    All radii are read off the same path, which makes differences across
    radii far less noisy than independent runs.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    order = np.argsort(-radii, kind="stable")
    zu, zv = torus_delta(start, center)
    out = _hit_kernel(zu, zv, radii[order], int(n), cfg.h_max, cfg.c_step, cfg.h_min,
                      cfg.bridge_correction, _rng(cfg, rng))
    res = np.empty_like(out)
    res[:, order] = out
    return res


def sample_hit_time(start, center, r: float, cfg: BmConfig, rng=None) -> float:
    if r <= 0:
        raise ValueError("r must be positive")
    return float(sample_hit_times(start, center, [r], cfg, 1, rng)[0, 0])


def moment_bound_check(samples, sup_mean: float, i: int) -> float:
    """Empirical i-th moment over i! sup_mean^i (at most one by Kac's formula)."""
    samples = np.asarray(samples, dtype=float)
    if i < 1 or sup_mean <= 0 or samples.size == 0:
        raise ValueError("need i >= 1, sup_mean > 0 and nonempty samples")
    return float(np.mean(samples**i) / (math.factorial(i) * sup_mean**i))


# --------------------------------------------------------------------------
# multi-center excursions


@dataclass(frozen=True)
class CrossingEvent:
    center_id: int
    scale: int
    time: float
    position: TorusPoint
    direction: str  # "inward" or "outward"


@dataclass(frozen=True)
class StopRule:
    kind: str
    n: int = 0
    center: int = 0
    t: float = 0.0
    quota: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("excursions", "time", "all_hit", "quota"):
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.kind == "excursions" and self.n < 1:
            raise ValueError("excursion stop rule needs n >= 1")
        if self.kind == "time" and not self.t > 0:
            raise ValueError("time stop rule needs t > 0")
        if self.kind == "quota" and not any(q > 0 for q in self.quota):
            raise ValueError("quota stop rule needs a positive quota")

    @classmethod
    def excursions(cls, n: int, center: int = 0) -> "StopRule":
        return cls("excursions", n=n, center=center)

    @classmethod
    def elapsed(cls, t: float) -> "StopRule":
        return cls("time", t=t)

    @classmethod
    def all_hit(cls) -> "StopRule":
        return cls("all_hit")

    @classmethod
    def down_quota(cls, quota) -> "StopRule":
        return cls("quota", quota=tuple(int(q) for q in quota))


@dataclass
class ExcursionTrace:
    center: TorusPoint
    ladder: ScaleLadder
    srw_path: np.ndarray
    times: np.ndarray
    events: list[CrossingEvent] = field(repr=False)
    excursion_boundaries: list[tuple[int, int]] = field(default_factory=list)
    D: np.ndarray = field(default_factory=lambda: np.empty(0))
    counts: np.ndarray = field(default_factory=lambda: np.empty((0, 0), np.int64))
    first_deep_hit: int | None = None

    @property
    def hit_time(self) -> float | None:
        """Time the innermost ball is first reached, if it was."""
        idx = np.flatnonzero(self.srw_path == self.ladder.K)
        return float(self.times[idx[0]]) if idx.size else None

    @property
    def tau_r1(self) -> float | None:
        idx = np.flatnonzero(self.srw_path == 1)
        return float(self.times[idx[0]]) if idx.size else None

    def up_down_after_r1(self) -> np.ndarray:
        """Sequence of (from_scale, +1/-1) moves after the first visit to scale 1."""
        idx = np.flatnonzero(self.srw_path == 1)
        if not idx.size:
            return np.empty((0, 2), np.int64)
        p = self.srw_path[idx[0]:]
        return np.column_stack([p[:-1], np.diff(p)])

    def N(self, l: int, n: int) -> int | None:
        """Number of l -> l+1 moves within the first n moves l -> l-1; None if
        fewer than n such moves were observed."""
        moves = self.up_down_after_r1()
        at = moves[moves[:, 0] == l, 1]
        downs = np.flatnonzero(at == -1)
        if n == 0:
            return 0
        if downs.size < n:
            return None
        return int(np.sum(at[: downs[n - 1]] == 1))

    def a_event(self, thresholds) -> bool | None:
        out = True
        for l, arg, bound in thresholds:
            v = self.N(l, arg)
            if v is None:
                return None
            out = out and v <= bound
        return out


def extract_srw_trace(events) -> list[int]:
    """Scale sequence of one center's crossings, consecutive repeats collapsed."""
    scales = []
    prev_t = -math.inf
    for ev in events:
        if isinstance(ev, CrossingEvent):
            s, t = ev.scale, ev.time
        elif isinstance(ev, (int, np.integer)):
            s, t = int(ev), prev_t
        else:
            s, t = int(ev[0]), float(ev[1])
        if t < prev_t:
            raise ValueError("events must be sorted by time")
        prev_t = t
        if not scales or scales[-1] != s:
            scales.append(s)
    return scales


def _build_trace(center: TorusPoint, ladder: ScaleLadder, events: list[CrossingEvent]) -> ExcursionTrace:
    path_full = [(e.scale, e.time) for e in events]
    srw = extract_srw_trace(path_full)
    # keep the time of the first event of each collapsed run
    times = []
    prev = None
    for s, t in path_full:
        if s != prev:
            times.append(t)
            prev = s
    srw_a = np.asarray(srw, dtype=np.int64)
    times_a = np.asarray(times, dtype=float)
    K = ladder.K

    bounds: list[tuple[int, int]] = []
    start = None
    for k, s in enumerate(srw):
        if s == 1 and start is None:
            start = k
        elif s == 0 and start is not None:
            bounds.append((start, k))
            start = None
    D = np.array([times_a[b] for _, b in bounds])
    counts = np.zeros((len(bounds), K + 1), np.int64)
    first_deep = None
    for e, (a, b) in enumerate(bounds):
        seg = srw_a[a:b + 1]
        ups = seg[:-1][np.diff(seg) == 1]
        counts[e] = np.bincount(ups, minlength=K + 1)[: K + 1]
        if first_deep is None and K in seg:
            first_deep = e + 1
    # the excursion that reaches K may still be open when the run stops
    if first_deep is None and start is not None and K in srw_a[start:]:
        first_deep = len(bounds) + 1
    return ExcursionTrace(center=center, ladder=ladder, srw_path=srw_a, times=times_a,
                          events=events, excursion_boundaries=bounds, D=D, counts=counts,
                          first_deep_hit=first_deep)


def _center_hash(cu: np.ndarray, cv: np.ndarray, r0: float):
    n_cell = int(1.0 / (2.0 * r0))
    if n_cell < 4:
        return 0, np.zeros(1, np.int64), np.zeros(0, np.int64)
    gi = (cu * n_cell).astype(np.int64) % n_cell
    gj = (cv * n_cell).astype(np.int64) % n_cell
    cell = gi * n_cell + gj
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=n_cell * n_cell)
    start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return n_cell, start, order.astype(np.int64)


def run_excursions(centers, ladder: ScaleLadder, stop: StopRule, cfg: BmConfig,
                   start=None, rng=None, max_steps: int = DEFAULT_MAX_STEPS) -> list[ExcursionTrace]:
    """Simulate one path and record every center's circle crossings.

    ``start`` defaults to a uniform point drawn from the run's generator.
    """
    centers = [c if isinstance(c, TorusPoint) else TorusPoint(*c) for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    if len(set(centers)) != len(centers):
        raise ValueError("centers must be pairwise distinct")
    if stop.kind == "excursions" and not 0 <= stop.center < len(centers):
        raise ValueError("stop center out of range")
    rng = _rng(cfg, rng)
    if start is None:
        start = TorusPoint(*rng.random(2))
    start = start if isinstance(start, TorusPoint) else TorusPoint(*start)

    cu = np.array([c.u for c in centers])
    cv = np.array([c.v for c in centers])
    radii = ladder.as_array()
    n_cell, cell_start, cell_items = _center_hash(cu, cv, radii[0])
    kind = {"excursions": 0, "time": 1, "all_hit": 2, "quota": 3}[stop.kind]
    quota = np.zeros(ladder.K + 1, np.int64)
    for l, q in enumerate(stop.quota[: ladder.K + 1]):
        quota[l] = q

    n_ev, ev_c, ev_s, ev_d, ev_t, ev_u, ev_v, _, steps = _excursion_kernel(
        cu, cv, radii, start.u, start.v, n_cell, cell_start, cell_items,
        kind, stop.center, stop.n, stop.t, quota,
        cfg.h_max, cfg.c_step, cfg.h_min, cfg.bridge_correction, rng, max_steps)
    if n_ev < 0:
        raise RuntimeError(f"excursion run exceeded {max_steps} steps")

    per_center: list[list[CrossingEvent]] = [[] for _ in centers]
    for k in range(n_ev):
        per_center[ev_c[k]].append(CrossingEvent(
            center_id=int(ev_c[k]), scale=int(ev_s[k]), time=float(ev_t[k]),
            position=TorusPoint(ev_u[k], ev_v[k]),
            direction="inward" if ev_d[k] > 0 else "outward"))
    return [_build_trace(c, ladder, evs) for c, evs in zip(centers, per_center)]


def direction_counts(traces, K: int) -> np.ndarray:
    """Pooled (down, up) next-move counts at each scale from collapsed paths."""
    out = np.zeros((K + 1, 2), np.int64)
    for tr in traces:
        p = tr.srw_path
        if p.size < 2:
            continue
        steps = np.diff(p)
        np.add.at(out, (p[:-1], (steps > 0).astype(np.int64)), 1)
    return out
