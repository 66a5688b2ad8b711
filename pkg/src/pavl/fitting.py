"""Model evaluation and estimation for the rotation and imbalance curves.

The rotation curve rot/N is modelled as a saturating exponential plus a
cubic residual in a warped coordinate:

    base(p)  = A * (1 - exp(-b * p))
    warp(f)  = (f + d1*f^2) / (1 + a1*f + a2*f^2 + a3*f^3)
    resid(p) = k * w * (w - a) * (w - b),   w = warp(base(p))

The imbalance interaction model is the no-intercept regression

    imbalances * p = m * rotations_raw + lambda * N * p

whose residual is fitted with the same warped-cubic shape per N, with an
N-dependent amplitude k(N).

Fitting uses damped least squares (scipy) with multi-starts; the contract
is the tolerance (relative parameter change < 1e-10, <= 10,000 evals) and
the starting points, not the optimizer brand.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares


class FitError(RuntimeError):
    """Fit failed to converge or the design is unusable.

    ``best`` carries the best parameter vector seen, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class BaseParams:
    A: float
    b: float


@dataclass
class WarpParams:
    a1: float
    a2: float
    a3: float
    d1: float


@dataclass
class ResidualParams:
    k: float
    a: float
    b: float


@dataclass
class InteractionParams:
    m: float
    lam: float
    m_stderr: float = 0.0
    lam_stderr: float = 0.0


@dataclass
class FitStats:
    mse: float
    rse: float
    pearson: float
    residual_variance: float
    residual_std: float


# Parameters published for the full-scale (N up to 512,000) rotation fit.
REFERENCE_BASE = BaseParams(A=0.67, b=5.72)
REFERENCE_WARP = WarpParams(a1=2.71747654, a2=-10.0, a3=5.69933709, d1=-1.45418721)
REFERENCE_RESIDUAL = ResidualParams(k=23.0, a=0.21760284, b=0.34390392)
REFERENCE_INTERACTION = InteractionParams(m=0.703972, lam=-0.020980)


def eval_base(p, params):
    """Saturating exponential A * (1 - exp(-b p))."""
    p = np.asarray(p, dtype=float)
    out = params.A * (1.0 - np.exp(-params.b * p))
    return float(out) if out.ndim == 0 else out


def eval_warp(f, params):
    """Rational warp of the base value; raises on a (near-)singular denominator."""
    f = np.asarray(f, dtype=float)
    num = f + params.d1 * f * f
    den = 1.0 + params.a1 * f + params.a2 * f * f + params.a3 * f ** 3
    if np.any(np.abs(den) < 1e-12):
        raise ZeroDivisionError("warp denominator vanishes on the evaluated range")
    out = num / den
    return float(out) if out.ndim == 0 else out


def eval_residual(p, base, warp, res):
    w = eval_warp(eval_base(p, base), warp)
    return res.k * w * (w - res.a) * (w - res.b)


def eval_rotation_model(p, base, warp, res):
    """Combined model: base(p) + warped-cubic residual."""
    return eval_base(p, base) + eval_residual(p, base, warp, res)


def fit_stats(observed, predicted):
    """MSE, RSE = sqrt(MSE), Pearson r, and population residual variance/std."""
    observed = np.asarray(observed, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if observed.shape != predicted.shape or observed.size < 2:
        raise ValueError("observed/predicted must be equal-length with >= 2 points")
    resid = observed - predicted
    mse = float(np.mean(resid ** 2))
    if observed.std() == 0.0 or predicted.std() == 0.0:
        raise ValueError("Pearson correlation undefined for constant input")
    pearson = float(np.corrcoef(observed, predicted)[0, 1])
    residual_variance = float(np.var(resid))
    return FitStats(mse=mse, rse=math.sqrt(mse), pearson=pearson,
                    residual_variance=residual_variance,
                    residual_std=math.sqrt(residual_variance))


def cosine_similarity(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 1:
        raise ValueError("sequences must be equal-length and nonempty")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine similarity undefined for a zero vector")
    return float(np.dot(x, y) / (nx * ny))


def _safe_stats(observed, predicted):
    """fit_stats, but degenerate (constant) data yields pearson = nan
    instead of failing the whole fit."""
    try:
        return fit_stats(observed, predicted)
    except ValueError:
        resid = np.asarray(observed, dtype=float) - np.asarray(predicted, dtype=float)
        mse = float(np.mean(resid ** 2))
        var = float(np.var(resid))
        return FitStats(mse=mse, rse=math.sqrt(mse), pearson=float("nan"),
                        residual_variance=var, residual_std=math.sqrt(var))


_LSQ_OPTS = dict(xtol=1e-12, ftol=1e-14, gtol=1e-14, max_nfev=10000)


def _multi_start(residual_fn, starts, bounds):
    best = None
    lo, hi = bounds
    for start in starts:
        start = np.clip(np.asarray(start, dtype=float), lo, hi)
        try:
            sol = least_squares(residual_fn, start, bounds=bounds, **_LSQ_OPTS)
        except Exception:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise FitError("all starting points failed")
    if not best.success:
        raise FitError("fit did not converge", best=best.x)
    return best


def fit_base(points):
    """Least-squares fit of the saturating exponential to (p, rot/N) points."""
    p = np.array([q for q, _ in points], dtype=float)
    y = np.array([v for _, v in points], dtype=float)
    if len(set(p.tolist())) < 3:
        raise FitError("need at least 3 distinct p values")

    def resid(theta):
        return theta[0] * (1.0 - np.exp(-theta[1] * p)) - y

    starts = [(0.67, 5.72)]
    starts += [(A0, b0) for A0 in (0.1, 0.5, 1.0) for b0 in (1.0, 5.0, 20.0)]
    sol = _multi_start(resid, starts, ([0.0, 0.0], [np.inf, np.inf]))
    params = BaseParams(A=float(sol.x[0]), b=float(sol.x[1]))
    if np.all(y == 0.0):
        # degenerate: b -> 0 fits zero data with any A; pin the saturation
        params = BaseParams(A=0.0, b=params.b)
    return params, _safe_stats(y, eval_base(p, params))


def _warped_cubic(p_vals, theta, base):
    a1, a2, a3, d1, k, a, b = theta
    f = eval_base(p_vals, base)
    num = f + d1 * f * f
    den = 1.0 + a1 * f + a2 * f * f + a3 * f ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        w = num / den
    w = np.where(np.abs(den) < 1e-12, np.inf, w)
    return k * w * (w - a) * (w - b)


def _residual_fit(points, base, k_bound):
    p = np.array([q for q, _ in points], dtype=float)
    y = np.array([v for _, v in points], dtype=float)
    if p.size < 10 or p.min() > 0.05 or p.max() < 0.9:
        raise FitError("need >= 10 residual points spanning [0, 1]")

    def resid(theta):
        out = _warped_cubic(p, theta, base) - y
        return np.where(np.isfinite(out), out, 1e6)

    ref = (REFERENCE_WARP.a1, REFERENCE_WARP.a2, REFERENCE_WARP.a3,
           REFERENCE_WARP.d1, REFERENCE_RESIDUAL.a, REFERENCE_RESIDUAL.b)

    def k_init(shape):
        # linear in k, so seed it by projection given the warp shape
        g = _warped_cubic(p, (*shape[:4], 1.0, *shape[4:]), base)
        g = np.where(np.isfinite(g), g, 0.0)
        denom = float(np.dot(g, g))
        return float(np.dot(g, y) / denom) if denom > 0 else 1.0

    starts = []
    for scale in (1.0, 0.9, 1.1):
        shape = tuple(v * scale for v in ref)
        k0 = k_init(shape)
        starts.append((*shape[:4], k0, *shape[4:]))
    starts.append((*ref[:4], REFERENCE_RESIDUAL.k, *ref[4:]))

    lo = [-np.inf, -20.0, -np.inf, -np.inf, -k_bound, -np.inf, -np.inf]
    hi = [np.inf, 20.0, np.inf, np.inf, k_bound, np.inf, np.inf]
    sol = _multi_start(resid, starts, (lo, hi))
    a1, a2, a3, d1, k, a, b = (float(v) for v in sol.x)
    if a > b:  # the two zeroes are interchangeable
        a, b = b, a
    warp = WarpParams(a1=a1, a2=a2, a3=a3, d1=d1)
    res = ResidualParams(k=k, a=a, b=b)
    return warp, res, p, y


def fit_residual(points, base):
    """Joint fit of the warp and cubic residual to (p, observed - base) points.

    Stats are reported on the combined model (base + residual). k is partly
    degenerate with a2; the identifiable outputs are the zeroes a, b and d1.
    """
    warp, res, p, y = _residual_fit(points, base, k_bound=100.0)
    observed = eval_base(p, base) + y
    predicted = eval_rotation_model(p, base, warp, res)
    return warp, res, _safe_stats(observed, predicted)


def fit_imbalance_residual(points_by_n, base):
    """Per-N warped-cubic fits to interaction-model residuals.

    The amplitude k(N) scales with N (residuals are raw counts), so it is
    left unbounded here, unlike the rotation-residual fit.
    """
    out = {}
    for n, points in sorted(points_by_n.items()):
        warp, res, p, y = _residual_fit(points, base, k_bound=np.inf)
        predicted = eval_residual(p, base, warp, res)
        out[n] = (warp, res, _safe_stats(y, predicted))
    return out


def fit_interaction(records):
    """OLS of imbalance_events * p on (rotations_raw, N * p), no intercept."""
    rot = np.array([r.rotations_total for r in records], dtype=float)
    np_ = np.array([r.n * r.p for r in records], dtype=float)
    y = np.array([r.imbalance_events * r.p for r in records], dtype=float)
    X = np.column_stack([rot, np_])
    if len(records) < 2 or np.linalg.matrix_rank(X) < 2:
        raise FitError("rank-deficient design for the interaction model")
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    pred = X @ beta
    resid = y - pred
    dof = max(len(y) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    params = InteractionParams(
        m=float(beta[0]), lam=float(beta[1]),
        m_stderr=float(np.sqrt(cov[0, 0])),
        lam_stderr=float(np.sqrt(cov[1, 1])))
    return params, fit_stats(y, pred)


@dataclass
class CrossingPoints:
    p_star_a: float | None
    p_star_b: float | None
    roots_a: list = field(default_factory=list)
    roots_b: list = field(default_factory=list)


def _bisect(fn, lo, hi, tol=1e-10):
    flo = fn(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def crossing_points(base, warp, res, scan_points=10000):
    """Solve warp(base(p)) = a and = b on [0, 1].

    A sign-change scan brackets every root; each bracket is refined by
    bisection to 1e-10. The smallest root per target is reported (all
    roots are kept in the aux lists); a missing root is None.
    """
    ps = np.linspace(0.0, 1.0, scan_points + 1)
    g = eval_warp(eval_base(ps, base), warp)

    def roots_for(target):
        vals = g - target
        roots = [float(ps[i]) for i in np.nonzero(vals == 0.0)[0]]
        sign = np.sign(vals)
        flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        fn = lambda p: eval_warp(eval_base(p, base), warp) - target
        roots += [_bisect(fn, float(ps[i]), float(ps[i + 1])) for i in flips]
        return sorted(roots)

    roots_a = roots_for(res.a)
    roots_b = roots_for(res.b)
    return CrossingPoints(
        p_star_a=roots_a[0] if roots_a else None,
        p_star_b=roots_b[0] if roots_b else None,
        roots_a=roots_a, roots_b=roots_b)


def fit_k_scaling(pairs):
    """Power-law probe: OLS of log k on log n. Exploratory output.

    Returns (exponent, coefficient, r_squared). Nonpositive k values are
    excluded with a warning; fewer than 3 input pairs is an error.
    """
    if len(pairs) < 3:
        raise ValueError("need at least 3 (n, k) pairs")
    usable = [(n, k) for n, k in pairs if k > 0]
    if len(usable) < len(pairs):
        warnings.warn("excluded %d nonpositive k value(s) from the scaling fit"
                      % (len(pairs) - len(usable)))
    if len(usable) < 2:
        raise ValueError("too few positive k values for a scaling fit")
    log_n = np.log([n for n, _ in usable])
    log_k = np.log([k for _, k in usable])
    exponent, intercept = np.polyfit(log_n, log_k, 1)
    pred = exponent * log_n + intercept
    ss_res = float(np.sum((log_k - pred) ** 2))
    ss_tot = float(np.sum((log_k - log_k.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(exponent), float(math.exp(intercept)), r_squared
