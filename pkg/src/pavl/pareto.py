"""Cost-gain frontier between rotations/N and average depth.

Both axes are normalized by their p = 1 value for the same N, so the AVL
endpoint sits at (1, 1) and p = 0 at (0, depth_ratio). Two knees are
reported: an efficiency knee (marginal depth gain per unit rotation cost
collapses) and a raw geometric knee of the frontier itself.
"""

import math
import warnings
from dataclasses import dataclass


@dataclass
class ParetoPoint:
    p: float
    rot_norm: float
    depth_norm: float


@dataclass
class KneeReport:
    n: int
    knee_p: float | None
    knee_rot: float | None
    knee_depth: float | None
    pareto_p: float | None
    pareto_rot: float | None
    pareto_depth: float | None


def normalize_frontier(aggregates):
    """ParetoPoints for one N, normalized by the p = 1 aggregate."""
    points = sorted(aggregates, key=lambda a: a.p)
    ns = {a.n for a in points}
    if len(ns) != 1:
        raise ValueError("normalize_frontier expects aggregates for a single n")
    ref = [a for a in points if a.p == 1.0]
    if not ref:
        raise ValueError("no p = 1 aggregate for n = %d" % ns.pop())
    ref = ref[0]
    if ref.rot_per_node_mean <= 0 or ref.avg_depth_mean <= 0:
        raise ValueError("degenerate p = 1 reference point")
    return [ParetoPoint(a.p,
                        a.rot_per_node_mean / ref.rot_per_node_mean,
                        a.avg_depth_mean / ref.avg_depth_mean)
            for a in points]


def bin_smooth(points, bin_count=40, window=3):
    """Log-p binning followed by a centered moving average.

    Points at p <= 0 fall into the first bin. Empty bins vanish; bins with
    a single point are kept (a merge warning fires only when every bin is
    that sparse). The moving average shrinks symmetrically at the ends.
    """
    if bin_count < 2:
        raise ValueError("bin_count must be >= 2")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    points = sorted(points, key=lambda q: q.p)
    pos = [q.p for q in points if q.p > 0]
    if not pos:
        raise ValueError("no positive-p points to bin")
    lo, hi = math.log(min(pos)), math.log(max(pos))
    span = hi - lo if hi > lo else 1.0
    bins = {}
    for q in points:
        if q.p <= 0:
            idx = 0
        else:
            idx = min(int((math.log(q.p) - lo) / span * bin_count), bin_count - 1)
        bins.setdefault(idx, []).append(q)
    if all(len(group) < 2 for group in bins.values()) and len(bins) < len(points):
        warnings.warn("sparse bins; consider fewer bins or more p points")
    binned = []
    for idx in sorted(bins):
        group = bins[idx]
        m = len(group)
        binned.append(ParetoPoint(
            sum(q.p for q in group) / m,
            sum(q.rot_norm for q in group) / m,
            sum(q.depth_norm for q in group) / m))

    half = window // 2
    smoothed = []
    n = len(binned)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        chunk = binned[i - h:i + h + 1]
        m = len(chunk)
        smoothed.append(ParetoPoint(
            binned[i].p,
            sum(q.rot_norm for q in chunk) / m,
            sum(q.depth_norm for q in chunk) / m))
    return smoothed


def efficiency_curve(points):
    """Marginal depth improvement per unit rotation cost between neighbours.

    Returns (p, efficiency) pairs; segments with zero rotation-cost change
    are skipped.
    """
    if len(points) < 2:
        raise ValueError("need at least 2 frontier points")
    points = sorted(points, key=lambda q: q.p)
    curve = []
    for prev, cur in zip(points, points[1:]):
        d_rot = cur.rot_norm - prev.rot_norm
        if d_rot == 0:
            continue
        curve.append((cur.p, (prev.depth_norm - cur.depth_norm) / d_rot))
    return curve


def detect_efficiency_knee(curve, threshold_fraction=0.05):
    """First p after which efficiency stays below the threshold fraction of
    its maximum. Returns (index, p), or None when it never collapses."""
    if not curve:
        raise ValueError("empty efficiency curve")
    peak = max(e for _, e in curve)
    cutoff = threshold_fraction * peak
    knee = None
    for i, (p, e) in enumerate(curve):
        if e < cutoff:
            if knee is None:
                knee = (i, p)
        else:
            knee = None
    return knee


def detect_pareto_knee(points):
    """Max perpendicular distance from the endpoint chord, after min-max
    rescaling of both axes. Returns (index, p), or None when the frontier
    is collinear (degenerate)."""
    if len(points) < 3:
        raise ValueError("need at least 3 frontier points")
    points = sorted(points, key=lambda q: q.p)
    xs = [q.rot_norm for q in points]
    ys = [q.depth_norm for q in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo or y_hi == y_lo:
        return None
    xs = [(x - x_lo) / (x_hi - x_lo) for x in xs]
    ys = [(y - y_lo) / (y_hi - y_lo) for y in ys]
    x0, y0 = xs[0], ys[0]
    dx, dy = xs[-1] - x0, ys[-1] - y0
    norm = math.hypot(dx, dy)
    if norm == 0:
        return None
    best_i, best_d = None, 0.0
    for i in range(1, len(points) - 1):
        d = abs(dx * (ys[i] - y0) - dy * (xs[i] - x0)) / norm
        if d > best_d:
            best_i, best_d = i, d
    if best_i is None or best_d < 1e-12:
        return None
    return best_i, points[best_i].p


def analyze_frontier(aggregates, bin_count=40, window=3, threshold_fraction=0.05):
    """Full per-N pipeline: normalize, smooth, both knees.

    Returns (smoothed points, efficiency curve, KneeReport).
    """
    n = aggregates[0].n
    raw = normalize_frontier(aggregates)
    smooth = bin_smooth(raw, bin_count=bin_count, window=window)
    curve = efficiency_curve(smooth)
    eff = detect_efficiency_knee(curve, threshold_fraction)
    geo = detect_pareto_knee(smooth)

    def at_p(p):
        q = min(smooth, key=lambda s: abs(s.p - p))
        return q.rot_norm, q.depth_norm

    knee_p = knee_rot = knee_depth = None
    if eff is not None:
        knee_p = eff[1]
        knee_rot, knee_depth = at_p(knee_p)
    pareto_p = pareto_rot = pareto_depth = None
    if geo is not None:
        pareto_p = geo[1]
        pareto_rot, pareto_depth = at_p(pareto_p)
    report = KneeReport(n=n, knee_p=knee_p, knee_rot=knee_rot,
                        knee_depth=knee_depth, pareto_p=pareto_p,
                        pareto_rot=pareto_rot, pareto_depth=pareto_depth)
    return smooth, curve, report
