"""Named experiments, deterministic replication and CSV output.

Replicate ``i`` (0-based) of a run with master seed ``s`` draws from
``np.random.default_rng(mix_seed(s, i))`` where ``mix_seed`` is the splitmix64
finaliser applied to ``s + (i + 1) * 0x9E3779B97F4A7C15`` (mod 2^64).  Rows
are merged by replicate index, so the output never depends on the number of
workers or on scheduling.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .bm import (
    BmConfig,
    StopRule,
    direction_counts,
    run_excursions,
    sample_exit_times,
    sample_hit_times,
)
from .cover import estimate_cover_time
from .oracles import (
    ExperimentParams,
    a_thresholds,
    budgets,
    ceil_frac,
    conditioned_excursion_expectations,
    exit_time_expectation,
    green_value,
    hit_time_prediction,
    one_point_exact,
    rate_bern_geom,
    two_point_bound,
)
from .srw import sample_excursions
from .torus import TorusPoint, make_scale_ladder, torus_distance

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
THRESHOLD_CONVENTION = "arg=round_half_up,bound=floor"


class UsageError(ValueError):
    """Invalid experiment name or parameters (CLI exit code 2)."""


def splitmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed: int, index: int) -> int:
    """64-bit seed of replicate ``index``."""
    return splitmix64(int(master_seed) + (int(index) + 1) * GOLDEN_GAMMA)


# --------------------------------------------------------------------------
# experiment registry


@dataclass(frozen=True)
class Experiment:
    name: str
    columns: tuple[str, ...]
    defaults: dict
    run: Callable[[dict, int, int], dict]
    validate: Callable[[dict], None] = lambda p: None
    description: str = ""


def _bm_cfg(p: dict, seed: int) -> BmConfig:
    return BmConfig(h_max=p["h_max"], c_step=p["c_step"], rng_seed=seed)


COMMON = {"reps": 100, "h_max": 1e-4, "c_step": 0.1}


def _green(p, i, seed):
    rng = np.random.default_rng(seed)
    x = TorusPoint(*rng.random(2))
    y = TorusPoint(*rng.random(2))
    gv = green_value(x, y, p["tol"])
    gs = green_value(y, x, p["tol"])
    return {"x_u": x.u, "x_v": x.v, "y_u": y.u, "y_v": y.v,
            "distance": torus_distance(x, y),
            "g": gv.g, "f": gv.f, "g_swapped": gs.g}


def _validate_green(p):
    if not p["tol"] > 0:
        raise UsageError("tol: must be positive")


def _hittime(p, i, seed):
    cfg = _bm_cfg(p, seed)
    c = TorusPoint(0.5, 0.5)
    tau = sample_hit_times(c + (p["d"], 0.0), c, [p["r"]], cfg, 1)[0, 0]
    return {"d": p["d"], "r": p["r"], "tau": tau, "prediction": hit_time_prediction(p["d"], p["r"])}


def _validate_hittime(p):
    if not 0 < p["r"] < p["d"] <= math.sqrt(0.5):
        raise UsageError("r/d: need 0 < r < d <= sqrt(2)/2")


def _exittime(p, i, seed):
    cfg = _bm_cfg(p, seed)
    c = TorusPoint(0.5, 0.5)
    tau = sample_exit_times(c + (p["d"], 0.0), c, p["r"], cfg, 1)[0]
    return {"r": p["r"], "d": p["d"], "tau": tau, "expectation": exit_time_expectation(p["r"], p["d"])}


def _validate_exittime(p):
    if not 0 <= p["d"] < p["r"] < 0.5:
        raise UsageError("r/d: need 0 <= d < r < 1/2")


def _ladder_check(p):
    try:
        make_scale_ladder(p["R"], p["eps"], p["K"])
    except ValueError as e:
        raise UsageError(f"R/eps/K: {e}") from None


def _excursions(p, i, seed):
    cfg = _bm_cfg(p, seed)
    lad = make_scale_ladder(p["R"], p["eps"], p["K"])
    rng = cfg.rng()
    tr = run_excursions([TorusPoint(0.5, 0.5)], lad, StopRule.excursions(p["n"]), cfg, rng=rng)[0]
    unit = math.log(lad.radii[0] / lad.radii[1]) / math.pi
    pred = p["n"] * unit
    return {"n": p["n"], "D_n": tr.D[-1], "D_1": tr.D[0], "prediction": pred,
            "ratio": tr.D[-1] / pred,
            "first_deep_hit": -1 if tr.first_deep_hit is None else tr.first_deep_hit}


def _validate_excursions(p):
    _ladder_check(p)
    if p["n"] < 1:
        raise UsageError("n: must be >= 1")


def _embed(p, i, seed):
    cfg = _bm_cfg(p, seed)
    lad = make_scale_ladder(p["R"], p["eps"], p["K"])
    traces = run_excursions([TorusPoint(0.5, 0.5)], lad, StopRule.excursions(p["n"]), cfg, rng=cfg.rng())
    cnt = direction_counts(traces, p["K"])[1:p["K"]]
    down, up = int(cnt[:, 0].sum()), int(cnt[:, 1].sum())
    tot = cnt.sum(axis=1)
    z = np.where(tot > 0, (cnt[:, 1] - tot / 2) / np.sqrt(np.maximum(tot, 1) / 4), 0.0)
    return {"crossings": down + up, "up": up, "down": down,
            "up_fraction": up / max(down + up, 1), "max_abs_z": float(np.max(np.abs(z)))}


def _validate_embed(p):
    _validate_excursions(p)
    if p["K"] < 2:
        raise UsageError("K: need K >= 2 for interior scales")


def _onepoint(p, i, seed):
    rng = np.random.default_rng(seed)
    thr = a_thresholds(p["n"], p["K"], p["delta"])
    ok = all(rng.negative_binomial(arg, 0.5) <= bound for _, arg, bound in thr if arg > 0)
    prob, logp = one_point_exact(p["n"], p["K"], p["delta"])
    return {"event": int(ok), "exact": prob, "log_exact": logp}


def _validate_a(p):
    if p["n"] < 1 or p["K"] < 2:
        raise UsageError("n/K: need n >= 1 and K >= 2")
    if not 0 < p["delta"] < 0.5:
        raise UsageError("delta: must lie in (0, 1/2)")
    if ceil_frac(p["delta"] * p["K"]) > p["K"] - 1:
        raise UsageError("delta/K: need ceil(delta K) <= K - 1")


def twopoint_experiment(params: dict, seed: int) -> dict:
    """Joint A-events of two centers at distance d, read off one path."""
    p = params
    cfg = _bm_cfg(p, seed)
    lad = make_scale_ladder(p["R"], p["eps"], p["K"])
    thr = a_thresholds(p["n"], p["K"], p["delta"])
    quota = [0] * (p["K"] + 1)
    for l, arg, _ in thr:
        quota[l] = arg
    x = TorusPoint(0.25, 0.25)
    centers = [x] if p["d"] == 0 else [x, x + (p["d"], 0.0)]
    ep = ExperimentParams(eps=p["eps"], delta=p["delta"], K=p["K"], R=p["R"])
    exact = one_point_exact(p["n"], p["K"], p["delta"])[0]
    radii = lad.radii
    if not thr:
        a = [True] * len(centers)
    else:
        traces = run_excursions(centers, lad, StopRule.down_quota(quota), cfg, rng=cfg.rng())
        a = [tr.a_event(thr) for tr in traces]
    ax, ay = a[0], a[-1]
    d = p["d"]
    # scale index i with r_{i+1} <= d <= r_i, if the centers are nested
    i_nest = -1
    for i in range(p["K"]):
        if radii[i + 1] <= d <= radii[i]:
            i_nest = i
            break
    lo = ceil_frac(p["delta"] * p["K"]) - 2
    bound = two_point_bound(i_nest, ep) if i_nest >= max(lo, 0) else 1.0
    far = d > 2 * radii[max(ceil_frac(p["delta"] * p["K"]) - 1, 0)]
    return {"d": d, "a_x": int(ax), "a_y": int(ay), "a_xy": int(ax and ay),
            "one_point_exact": exact, "product_exact": exact * exact,
            "far": int(far), "nested_scale": i_nest, "rem_bound": bound}


def _twopoint(p, i, seed):
    return twopoint_experiment(p, seed)


def _validate_twopoint(p):
    _ladder_check(p)
    _validate_a(p)
    if p["d"] != 0 and p["d"] < p["eps"]:
        raise UsageError("d: centers closer than eps (use d=0 for a single center)")
    if not 0 <= p["d"] < 0.5:
        raise UsageError("d: must lie in [0, 1/2)")


def regular_experiment(params: dict, seed: int) -> dict:
    """Down-crossings at scale ceil(delta K) over frak_n(3) SRW excursions."""
    p = params
    rng = np.random.default_rng(seed)
    ep = ExperimentParams(eps=p["eps"], delta=p["delta"], K=p["K"])
    b = budgets(ep)
    m = ep.first_scale
    n3 = int(round(b.frak_n[3]))
    _, downs, _ = sample_excursions(p["K"], n3, rng)
    count = int(downs[:, m].sum())
    rate = rate_bern_geom(m, 1.0 / (1.0 - p["delta"]))
    return {"m": m, "excursions": n3, "count": count, "frak_n2": b.frak_n[2],
            "exceeds": int(count > b.frak_n[2]), "rate": rate}


def _regular(p, i, seed):
    return regular_experiment(p, seed)


def _validate_regular(p):
    if p["delta"] < 0.05 or p["delta"] >= 0.5:
        raise UsageError("delta: regular experiment needs 0.05 <= delta < 1/2")
    if not 0 < p["eps"] < 1 or p["K"] < 2:
        raise UsageError("eps/K: need 0 < eps < 1 and K >= 2")
    ep = ExperimentParams(eps=p["eps"], delta=p["delta"], K=p["K"])
    if ep.first_scale < 2 or ep.first_scale > p["K"]:
        raise UsageError("delta/K: need 2 <= ceil(delta K) <= K")
    if budgets(ep).frak_n[3] < 1:
        raise UsageError("eps: frak_n(3) below 1")


def _conditioned(p, i, seed):
    K = p["K"]
    l = i + 1
    exact = conditioned_excursion_expectations(K)[l] if l < K else 0.0
    approx = (1.0 - (l + 1) / K) ** 2
    return {"K": K, "l": l, "exact": exact, "approx": approx,
            "rel_err": abs(exact - approx) / approx if approx > 0 else float(exact != 0)}


def _validate_conditioned(p):
    if p["K"] < 2:
        raise UsageError("K: must be >= 2")
    if p["reps"] > p["K"] - 1:
        raise UsageError("reps: conditioned rows are l = 1..K-1, so reps <= K-1")


def _cover(p, i, seed):
    cfg = _bm_cfg(p, seed)
    rng = cfg.rng()
    start = TorusPoint(*rng.random(2))
    res = estimate_cover_time(p["eps"], cfg, start=start, rng=rng)
    return {"eps": p["eps"], "t_cover": res.t_cover, "ratio": res.ratio,
            "bracket_lo": res.bracket_lo, "bracket_hi": res.bracket_hi,
            "argmax_u": res.argmax.u, "argmax_v": res.argmax.v, "steps": res.steps}


def _validate_cover(p):
    if not 0 < p["eps"] < 0.2:
        raise UsageError("eps: cover experiment needs 0 < eps < 0.2")


def _moments(p, i, seed):
    cfg = _bm_cfg(p, seed)
    c = TorusPoint(0.5, 0.5)
    tau = sample_exit_times(c, c, p["R"], cfg, 1)[0]
    s = p["R"] ** 2 / 2
    return {"tau": tau, "kac_1": tau / s, "kac_2": tau**2 / (2 * s**2), "kac_3": tau**3 / (6 * s**3)}


def _validate_moments(p):
    if not 0 < p["R"] < 0.5:
        raise UsageError("R: must lie in (0, 1/2)")


def _regular_default_eps(K=10, delta=0.3, n3=200.0) -> float:
    return math.exp(-n3 / (2 * K * (1 - delta) ** 3))


EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in [
        Experiment("green", ("x_u", "x_v", "y_u", "y_v", "distance", "g", "f", "g_swapped"),
                   {**COMMON, "tol": 1e-12}, _green, _validate_green,
                   "Torus Green's function at random pairs"),
        Experiment("hittime", ("d", "r", "tau", "prediction"),
                   {**COMMON, "reps": 1000, "d": 0.25, "r": 0.01}, _hittime, _validate_hittime,
                   "Hitting time of B_r(x) from distance d"),
        Experiment("exittime", ("r", "d", "tau", "expectation"),
                   {**COMMON, "reps": 1000, "r": 0.25, "d": 0.0}, _exittime, _validate_exittime,
                   "Exit time of B_r(x) from distance d"),
        Experiment("excursions", ("n", "D_n", "D_1", "prediction", "ratio", "first_deep_hit"),
                   {**COMMON, "reps": 20, "R": 0.1, "eps": 0.01, "K": 1, "n": 100},
                   _excursions, _validate_excursions, "Completion time of the n-th excursion"),
        Experiment("embed", ("crossings", "up", "down", "up_fraction", "max_abs_z"),
                   {**COMMON, "reps": 10, "R": 0.25, "eps": 0.25 / 32, "K": 5, "n": 500},
                   _embed, _validate_embed, "Direction of the next crossing at interior scales"),
        Experiment("onepoint", ("event", "exact", "log_exact"),
                   {**COMMON, "reps": 10000, "n": 4, "K": 2, "delta": 0.1},
                   _onepoint, _validate_a, "One-point A-event indicator vs exact probability"),
        Experiment("twopoint", ("d", "a_x", "a_y", "a_xy", "one_point_exact", "product_exact",
                                "far", "nested_scale", "rem_bound"),
                   {**COMMON, "reps": 200, "n": 4, "K": 2, "delta": 0.1, "R": 0.2, "eps": 0.02,
                    "d": 0.45},
                   _twopoint, _validate_twopoint, "Joint A-events of two centers on one path"),
        Experiment("regular", ("m", "excursions", "count", "frak_n2", "exceeds", "rate"),
                   {**COMMON, "reps": 1000, "K": 10, "delta": 0.3, "eps": _regular_default_eps()},
                   _regular, _validate_regular, "Regularity of down-crossings at scale ceil(delta K)"),
        Experiment("conditioned", ("K", "l", "exact", "approx", "rel_err"),
                   {**COMMON, "reps": 9, "K": 10}, _conditioned, _validate_conditioned,
                   "Excursion counts of the walk conditioned to avoid K"),
        Experiment("cover", ("eps", "t_cover", "ratio", "bracket_lo", "bracket_hi", "argmax_u",
                             "argmax_v", "steps"),
                   {**COMMON, "reps": 4, "eps": 0.05}, _cover, _validate_cover,
                   "Cover time and lattice bracket"),
        Experiment("moments", ("tau", "kac_1", "kac_2", "kac_3"),
                   {**COMMON, "reps": 1000, "R": 0.25}, _moments, _validate_moments,
                   "Exit-time moments against Kac's bound"),
    ]
}

INT_PARAMS = {"K", "n", "reps"}


# --------------------------------------------------------------------------
# configs and rows


@dataclass
class ExperimentConfig:
    name: str
    params: dict = field(default_factory=dict)
    master_seed: int = 0
    workers: int = 1
    out_path: str | None = None

    def resolved(self) -> dict:
        """Defaults merged with overrides, coerced and validated."""
        if self.name not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.name!r}; choose from {sorted(EXPERIMENTS)}")
        exp = EXPERIMENTS[self.name]
        p = dict(exp.defaults)
        for k, v in self.params.items():
            if k not in p:
                raise UsageError(f"{k}: not a parameter of {self.name!r} (allowed: {sorted(p)})")
            try:
                p[k] = _coerce(k, v)
            except (TypeError, ValueError):
                raise UsageError(f"{k}: cannot parse {v!r}") from None
        if p["reps"] < 1:
            raise UsageError("reps: must be >= 1")
        if not p["h_max"] > 0 or not 0 < p["c_step"] <= 1:
            raise UsageError("h_max/c_step: need h_max > 0 and 0 < c_step <= 1")
        if self.workers < 1:
            raise UsageError("workers: must be >= 1")
        if not 0 <= int(self.master_seed) <= MASK64:
            raise UsageError("seed: must be a 64-bit unsigned integer")
        exp.validate(p)
        return p


def _coerce(key: str, value):
    if key in INT_PARAMS:
        f = float(value)
        if f != int(f):
            raise ValueError
        return int(f)
    return float(value)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    replicate: int
    values: tuple
    seed_used: int


def _run_one(args):
    name, params, i, seed = args
    exp = EXPERIMENTS[name]
    out = exp.run(params, i, seed)
    return tuple(out[c] for c in exp.columns)


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    params = cfg.resolved()
    seeds = [mix_seed(cfg.master_seed, i) for i in range(params["reps"])]
    jobs = [(cfg.name, params, i, s) for i, s in enumerate(seeds)]
    if cfg.workers == 1:
        values = [_run_one(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (4 * cfg.workers))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(_run_one, jobs, chunksize=chunk))
    return [ResultRow(cfg.name, i, v, s) for i, (v, s) in enumerate(zip(values, seeds))]


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def metadata(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    params = cfg.resolved()
    meta = [("experiment", cfg.name), ("version", __version__),
            ("master_seed", str(int(cfg.master_seed))),
            ("seed_mixing", "splitmix64(master_seed + (i+1)*0x9E3779B97F4A7C15)"),
            ("bridge_correction", "1"), ("h_min", repr(BmConfig().h_min)),
            ("thresholds", THRESHOLD_CONVENTION)]
    meta += [(k, _fmt(params[k])) for k in sorted(params)]
    return meta


def to_csv(cfg: ExperimentConfig, rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    for k, v in metadata(cfg):
        buf.write(f"# {k}={v}\n")
    cols = EXPERIMENTS[cfg.name].columns
    buf.write(",".join(("experiment", "replicate") + cols + ("seed_used",)) + "\n")
    for r in sorted(rows, key=lambda r: (r.experiment, r.replicate)):
        buf.write(",".join([r.experiment, str(r.replicate)] + [_fmt(v) for v in r.values]
                           + [str(r.seed_used)]) + "\n")
    return buf.getvalue()


def write_csv(cfg: ExperimentConfig, rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(cfg, rows))


@dataclass(frozen=True)
class ColumnSummary:
    mean: float
    stderr: float
    p2_5: float
    p97_5: float


def summarize(rows: list[ResultRow]) -> dict[str, ColumnSummary]:
    """Per-column mean, standard error and 2.5/97.5 percentiles."""
    if not rows:
        raise UsageError("summarize needs at least one row")
    names = {r.experiment for r in rows}
    if len(names) != 1:
        raise UsageError(f"summarize got mixed experiments {sorted(names)}")
    cols = EXPERIMENTS[rows[0].experiment].columns
    data = np.array([r.values for r in rows], dtype=float)
    out = {}
    for j, c in enumerate(cols):
        x = data[:, j]
        se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        lo, hi = np.percentile(x, [2.5, 97.5])
        out[c] = ColumnSummary(float(np.mean(x)), se, float(lo), float(hi))
    return out


def parse_config_file(path) -> dict[str, str]:
    """Flat ``key=value`` file; blank lines and '#' comments ignored."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
