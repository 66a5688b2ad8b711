"""Seeded Monte-Carlo sweeps over (N, p) and distribution statistics.

Every run's seed is derived by hashing (master_seed, n, p_index,
run_index), so results are identical no matter how many workers execute
the sweep or in what order. Records are always returned in canonical
(n, p, run_index) order.
"""

import bisect
import csv
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from hashlib import blake2b

import numpy as np

from . import metrics
from .tree import PavlTree, validate


class ConfigError(ValueError):
    """Invalid sweep configuration."""


KEY_ORDERS = ("random", "sorted", "reversed")


@dataclass
class PGridSpec:
    dense_lo: float = 1e-6
    dense_hi: float = 1e-3
    dense_count: int = 16
    coarse_count: int = 16
    include_zero: bool = True
    include_one: bool = True


@dataclass
class SweepConfig:
    n_values: list = field(default_factory=lambda: [1000, 2000, 4000, 8000, 16000, 32000, 65536])
    p_grid: PGridSpec = field(default_factory=PGridSpec)
    runs_per_point: int = 50
    master_seed: int = 42
    key_order: str = "random"

    def __post_init__(self):
        if not self.n_values or sorted(self.n_values) != list(self.n_values):
            raise ConfigError("n_values must be a nonempty ascending list")
        if self.runs_per_point < 1:
            raise ConfigError("runs_per_point must be >= 1")
        if self.key_order not in KEY_ORDERS:
            raise ConfigError("key_order must be one of %s" % (KEY_ORDERS,))


@dataclass
class RunRecord:
    n: int
    p: float
    run_index: int
    seed: int
    rotations_total: int
    single_rotations: int
    double_rotations: int
    imbalance_events: int
    height: int
    avg_depth: float
    sigma: float
    violating_fraction: float
    elapsed_ms: float


@dataclass
class AggregatePoint:
    n: int
    p: float
    runs: int
    rot_per_node_mean: float
    rot_per_node_var: float
    imbalance_mean: float
    imbalance_var: float
    avg_depth_mean: float
    avg_depth_var: float
    height_mean: float
    height_var: float
    sigma_mean: float
    sigma_var: float
    violating_mean: float
    violating_var: float


def build_p_grid(spec):
    """Assemble the log-spaced p grid: optional 0, a dense log band, a
    coarse log band up to (but excluding) 1, and optional exact 1."""
    if not (0.0 < spec.dense_lo < spec.dense_hi < 1.0):
        raise ConfigError("need 0 < dense_lo < dense_hi < 1")
    if spec.dense_count < 1 or spec.coarse_count < 0:
        raise ConfigError("dense_count must be >= 1, coarse_count >= 0")
    grid = []
    if spec.include_zero:
        grid.append(0.0)
    grid.extend(np.geomspace(spec.dense_lo, spec.dense_hi, spec.dense_count).tolist())
    if spec.coarse_count:
        coarse = np.geomspace(spec.dense_hi, 1.0, spec.coarse_count + 2)[1:-1]
        grid.extend(coarse.tolist())
    if spec.include_one:
        grid.append(1.0)
    # quantize to the CSV precision (10 significant digits) so file
    # round-trips reproduce the in-memory grid exactly
    out = sorted({float(format(p, ".10g")) for p in grid})
    if len(out) < 2:
        raise ConfigError("p grid degenerate")
    return out


def derive_seed(*parts):
    """Stable 64-bit seed from any tuple of ints/strings/floats."""
    h = blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("ascii"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "big")


def generate_keys(n, order, seed):
    """A permutation of 1..n in the requested insertion order."""
    if n < 1:
        raise ConfigError("key count must be positive")
    keys = list(range(1, n + 1))
    if order == "sorted":
        return keys
    if order == "reversed":
        keys.reverse()
        return keys
    if order == "random":
        import random
        random.Random(seed).shuffle(keys)
        return keys
    raise ConfigError("unknown key order %r" % (order,))


def run_single(n, p, seed, order="random"):
    """Build one tree and capture all per-run measurements."""
    keys = generate_keys(n, order, derive_seed("keys", seed))
    start = time.perf_counter()
    tree = PavlTree(p, derive_seed("coins", seed))
    tree.insert_all(keys)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    m = metrics.tree_metrics(tree)
    c = tree.counters
    return RunRecord(
        n=n, p=p, run_index=-1, seed=seed,
        rotations_total=c.rotations_total,
        single_rotations=c.single_rotations,
        double_rotations=c.double_rotations,
        imbalance_events=c.imbalance_events,
        height=m.height, avg_depth=m.avg_depth, sigma=m.sigma,
        violating_fraction=m.violating_fraction,
        elapsed_ms=elapsed_ms,
    )


def _run_task(task):
    n, p, run_index, seed, order = task
    record = run_single(n, p, seed, order)
    record.run_index = run_index
    return record


def sweep_tasks(config):
    grid = build_p_grid(config.p_grid)
    tasks = []
    for n in config.n_values:
        for p_index, p in enumerate(grid):
            for run_index in range(config.runs_per_point):
                seed = derive_seed(config.master_seed, n, p_index, run_index)
                tasks.append((n, p, run_index, seed, config.key_order))
    return tasks


def run_sweep(config, workers=1, progress=None, timing=False):
    """All RunRecords for the config, in canonical (n, p, run_index) order.

    ``workers > 1`` fans tasks out to a process pool; outputs are
    identical regardless of worker count. Wall-clock timings are only kept
    when ``timing`` is set, since they would break bit-exact
    reproducibility of sweep outputs.
    """
    tasks = sweep_tasks(config)
    if workers <= 1:
        records = []
        for i, task in enumerate(tasks):
            records.append(_run_task(task))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=8))
    if not timing:
        for r in records:
            r.elapsed_ms = 0.0
    records.sort(key=lambda r: (r.n, r.p, r.run_index))
    return records


def _mean_var(values):
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var


def group_records(records):
    """Records keyed by (n, p), preserving canonical order inside groups."""
    groups = {}
    for r in records:
        groups.setdefault((r.n, r.p), []).append(r)
    return groups


def aggregate(records, expected_runs=None):
    """Per-(n, p) sample means and unbiased variances."""
    points = []
    for (n, p), group in sorted(group_records(records).items()):
        if expected_runs is not None and len(group) != expected_runs:
            warnings.warn(
                "group (n=%d, p=%g) has %d runs, expected %d"
                % (n, p, len(group), expected_runs))
        rot = [r.rotations_total / r.n for r in group]
        imb = [float(r.imbalance_events) for r in group]
        dep = [r.avg_depth for r in group]
        hgt = [float(r.height) for r in group]
        sig = [r.sigma for r in group]
        vio = [r.violating_fraction for r in group]
        vals = [_mean_var(v) for v in (rot, imb, dep, hgt, sig, vio)]
        points.append(AggregatePoint(
            n, p, len(group),
            vals[0][0], vals[0][1], vals[1][0], vals[1][1],
            vals[2][0], vals[2][1], vals[3][0], vals[3][1],
            vals[4][0], vals[4][1], vals[5][0], vals[5][1]))
    return points


# --- distribution statistics -------------------------------------------------

def ecdf(values):
    """Unique sorted values with F(x) = (# <= x) / count."""
    if not len(values):
        raise ValueError("ecdf of an empty sample")
    vals = sorted(values)
    n = len(vals)
    out = []
    for i, v in enumerate(vals):
        if i + 1 == n or vals[i + 1] != v:
            out.append((v, (i + 1) / n))
    return out


def tail_probability(values, thresholds):
    """P(X > t) for each threshold, by direct counting."""
    if not len(values):
        raise ValueError("tail probability of an empty sample")
    vals = sorted(values)
    n = len(vals)
    return [(t, (n - bisect.bisect_right(vals, t)) / n) for t in thresholds]


def tail_exponential_fit(values, quantile_band=(0.5, 0.99)):
    """OLS of log P(X > t) against t over the quantile band.

    Thresholds are the sorted unique sample values inside the band;
    thresholds with empty tails are unusable and dropped. Returns
    (slope, intercept, r_squared).
    """
    q_lo, q_hi = quantile_band
    if len(values) < 50:
        raise ValueError("need at least 50 samples for a tail fit")
    if not (0.0 <= q_lo < q_hi <= 1.0):
        raise ValueError("invalid quantile band %r" % (quantile_band,))
    vals = np.sort(np.asarray(values, dtype=float))
    lo, hi = np.quantile(vals, [q_lo, q_hi])
    uniq = np.unique(vals)
    ts = uniq[(uniq >= lo) & (uniq <= hi)]
    pts = [(t, prob) for t, prob in tail_probability(vals, ts) if prob > 0.0]
    if len(pts) < 3:
        raise ValueError("too few usable thresholds in the quantile band")
    t = np.array([x for x, _ in pts])
    logp = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(t, logp, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logp - pred) ** 2))
    ss_tot = float(np.sum((logp - logp.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), r_squared


def height_exceedance(records, margins):
    """Per (n, p) group: fraction of runs with height >= group mean + m."""
    out = []
    for (n, p), group in sorted(group_records(records).items()):
        if not group:
            raise ValueError("empty group (n=%d, p=%g)" % (n, p))
        heights = [r.height for r in group]
        mean = sum(heights) / len(heights)
        for m in margins:
            prob = sum(1 for h in heights if h >= mean + m) / len(heights)
            out.append((n, p, m, prob))
    return out


# --- file formats ------------------------------------------------------------

RUNS_HEADER = ("n,p,run_index,seed,rotations_total,single_rotations,"
               "double_rotations,imbalance_events,height,avg_depth,sigma,"
               "violating_fraction,elapsed_ms")

AGGREGATE_HEADER = ("n,p,runs,rot_per_node_mean,rot_per_node_var,"
                    "imbalance_mean,imbalance_var,avg_depth_mean,avg_depth_var,"
                    "height_mean,height_var,sigma_mean,sigma_var,"
                    "violating_mean,violating_var")


def _fmt_p(p):
    return format(p, ".10g")


def write_runs_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RUNS_HEADER + "\n")
        for r in records:
            fh.write("%d,%s,%d,%d,%d,%d,%d,%d,%d,%s,%s,%s,%s\n" % (
                r.n, _fmt_p(r.p), r.run_index, r.seed,
                r.rotations_total, r.single_rotations, r.double_rotations,
                r.imbalance_events, r.height,
                repr(r.avg_depth), repr(r.sigma),
                repr(r.violating_fraction), repr(r.elapsed_ms)))


def read_runs_csv(path):
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = RUNS_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ConfigError("bad runs.csv header in %s" % path)
        for row_no, row in enumerate(reader, start=2):
            try:
                records.append(RunRecord(
                    n=int(row["n"]), p=float(row["p"]),
                    run_index=int(row["run_index"]), seed=int(row["seed"]),
                    rotations_total=int(row["rotations_total"]),
                    single_rotations=int(row["single_rotations"]),
                    double_rotations=int(row["double_rotations"]),
                    imbalance_events=int(row["imbalance_events"]),
                    height=int(row["height"]),
                    avg_depth=float(row["avg_depth"]),
                    sigma=float(row["sigma"]),
                    violating_fraction=float(row["violating_fraction"]),
                    elapsed_ms=float(row["elapsed_ms"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError("bad runs.csv row %d in %s: %s"
                                  % (row_no, path, exc)) from exc
    return records


def write_aggregate_csv(points, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for a in points:
            cols = [str(a.n), _fmt_p(a.p), str(a.runs)]
            cols += [repr(getattr(a, f.name))
                     for f in fields(AggregatePoint)[3:]]
            fh.write(",".join(cols) + "\n")


def read_aggregate_csv(path):
    points = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = AGGREGATE_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ConfigError("bad aggregate.csv header in %s" % path)
        for row_no, row in enumerate(reader, start=2):
            try:
                points.append(AggregatePoint(
                    n=int(row["n"]), p=float(row["p"]), runs=int(row["runs"]),
                    **{f.name: float(row[f.name])
                       for f in fields(AggregatePoint)[3:]}))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError("bad aggregate.csv row %d in %s: %s"
                                  % (row_no, path, exc)) from exc
    return points


# --- config file -------------------------------------------------------------

_CONFIG_KEYS = ("n_values", "dense_lo", "dense_hi", "dense_count",
                "coarse_count", "include_zero", "include_one",
                "runs_per_point", "master_seed", "key_order")


def _parse_bool(text):
    text = text.strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError("not a boolean: %r" % text)


def parse_config(text, env=None):
    """Flat ``key = value`` config; environment variables with the same
    names override file values. Unknown keys are rejected."""
    env = os.environ if env is None else env
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config line %d is not key = value" % line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError("unknown config key %r (line %d)" % (key, line_no))
        raw[key] = value
    for key in _CONFIG_KEYS:
        if key in env:
            raw[key] = env[key]
    try:
        grid = PGridSpec(
            dense_lo=float(raw.get("dense_lo", 1e-6)),
            dense_hi=float(raw.get("dense_hi", 1e-3)),
            dense_count=int(raw.get("dense_count", 16)),
            coarse_count=int(raw.get("coarse_count", 16)),
            include_zero=_parse_bool(raw["include_zero"]) if "include_zero" in raw else True,
            include_one=_parse_bool(raw["include_one"]) if "include_one" in raw else True)
        config = SweepConfig(
            n_values=[int(v) for v in raw["n_values"].split(",")]
            if "n_values" in raw else SweepConfig().n_values,
            p_grid=grid,
            runs_per_point=int(raw.get("runs_per_point", 50)),
            master_seed=int(raw.get("master_seed", 42)),
            key_order=raw.get("key_order", "random"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("bad config value: %s" % exc) from exc
    return config


def config_to_text(config):
    """Canonical textual form of a config (also used for hashing)."""
    g = config.p_grid
    lines = [
        "n_values = %s" % ",".join(str(n) for n in config.n_values),
        "dense_lo = %s" % repr(g.dense_lo),
        "dense_hi = %s" % repr(g.dense_hi),
        "dense_count = %d" % g.dense_count,
        "coarse_count = %d" % g.coarse_count,
        "include_zero = %s" % ("true" if g.include_zero else "false"),
        "include_one = %s" % ("true" if g.include_one else "false"),
        "runs_per_point = %d" % config.runs_per_point,
        "master_seed = %d" % config.master_seed,
        "key_order = %s" % config.key_order,
    ]
    return "\n".join(lines) + "\n"
