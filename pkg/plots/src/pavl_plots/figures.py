"""Figure registry: one builder per figure id.

Axis conventions are fixed per figure: p axes are logarithmic wherever
the sweeps are log-spaced (rotation/depth/σ summaries, efficiency), and
linear for residual-structure figures whose interest lies in p ≳ 0.1.
Every figure carries the manifest's config hash in a footer.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402


class SkipFigure(RuntimeError):
    """The inputs exist but lack the data this figure needs."""


def _positive_p(rows):
    return [r for r in rows if r["p"] > 0.0]


def _series(rows, x, y):
    return [r[x] for r in rows], [r[y] for r in rows]


def _fig(ncols=1, width=6.4, height=4.4):
    fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height))
    return fig, (axes if ncols > 1 else [axes])


def _p_line(lo=1e-6, hi=1.0, count=400):
    return np.geomspace(lo, hi, count)


def _largest_n_runs(runs):
    n_max = max(r["n"] for r in runs)
    return n_max, [r for r in runs if r["n"] == n_max]


def _sigma_p_choices(rows, count=4):
    """A spread of p values at which σ actually varies."""
    usable = sorted({r["p"] for r in rows
                     if r["p"] > 0.0 and r["sigma"] > 0.0})
    if not usable:
        raise SkipFigure("no runs with nonzero sigma")
    idx = sorted({int(round(i * (len(usable) - 1) / max(count - 1, 1)))
                  for i in range(count)})
    return [usable[i] for i in idx]


# --- rotation structure --------------------------------------------------------

def fig_rotations_vs_p(data):
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        ax.plot(*_series(_positive_p(rows), "p", "rot_per_node_mean"),
                marker="o", markersize=3, linewidth=1, label="n=%d" % n)
    fits = data.get("fits")
    if fits and "base" in fits and "A" in fits["base"]:
        ps = _p_line()
        ax.plot(ps, io.eval_base(ps, fits["base"]), "k--", linewidth=1,
                label="A(1-e^{-bp})")
    ax.set_xscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("rotations / N")
    ax.legend(fontsize=8)
    ax.set_title("Rotations per node versus repair probability")
    return fig


def fig_rotation_residual(data):
    fits = data["fits"]
    base = fits.get("base", {})
    if "A" not in base:
        raise SkipFigure("no base-model parameters in fits.json")
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        ps, ys = _series(rows, "p", "rot_per_node_mean")
        resid = np.array(ys) - io.eval_base(ps, base)
        ax.plot(ps, resid, marker="o", markersize=3, linewidth=0.8,
                label="n=%d" % n)
    pooled = fits.get("rotation_residual", {}).get("pooled", {})
    if "residual" in pooled:
        ps = np.linspace(0.0, 1.0, 400)
        ax.plot(ps, io.eval_cubic(ps, base, pooled["warp"], pooled["residual"]),
                "k--", linewidth=1.2, label="warped cubic")
    ax.axhline(0.0, color="gray", linewidth=0.6)
    ax.set_xlabel("p")
    ax.set_ylabel("rotations/N - base model")
    ax.legend(fontsize=8)
    ax.set_title("Residual of the base rotation model")
    return fig


def fig_warp_comparison(data):
    fits = data["fits"]
    base = fits.get("base", {})
    rr = fits.get("rotation_residual", {})
    curves = []
    pooled = rr.get("pooled", {})
    if "warp" in pooled:
        curves.append(("pooled", pooled))
    for n, entry in sorted(rr.get("per_n", {}).items(), key=lambda kv: int(kv[0])):
        if "warp" in entry:
            curves.append(("n=%s" % n, entry))
    if "A" not in base or not curves:
        raise SkipFigure("no fitted warp parameters in fits.json")
    fig, (ax,) = _fig()
    ps = np.linspace(0.0, 1.0, 400)
    for label, entry in curves:
        kwargs = {"color": "black", "linewidth": 1.5} if label == "pooled" \
            else {"linewidth": 0.9}
        ax.plot(ps, io.eval_warp(io.eval_base(ps, base), entry["warp"]),
                label=label, **kwargs)
    if "residual" in pooled:
        for key in ("a", "b"):
            ax.axhline(pooled["residual"][key], color="gray",
                       linestyle=":", linewidth=0.8)
    ax.set_xlabel("p")
    ax.set_ylabel("warp(base(p))")
    ax.legend(fontsize=8)
    ax.set_title("Warped base curve; dotted lines mark the cubic zeroes")
    return fig


# --- imbalance/interaction structure -------------------------------------------

def _interaction(fits):
    inter = fits.get("interaction", {})
    if "m" not in inter:
        raise SkipFigure("no interaction-model parameters in fits.json")
    return inter


def fig_imbalance_overlay(data):
    inter = _interaction(data["fits"])
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        ps = [r["p"] for r in rows]
        observed = [r["imbalance_mean"] * r["p"] for r in rows]
        predicted = [inter["m"] * r["rot_per_node_mean"] * r["n"]
                     + inter["lambda"] * r["n"] * r["p"] for r in rows]
        line, = ax.plot(ps, observed, marker="o", markersize=3,
                        linestyle="none", label="n=%d observed" % n)
        ax.plot(ps, predicted, color=line.get_color(), linewidth=1,
                label="n=%d model" % n)
    ax.set_xlabel("p")
    ax.set_ylabel("imbalances * p")
    ax.legend(fontsize=7)
    ax.set_title("Interaction model m*rotations + lambda*N*p")
    return fig


def fig_imbalance_residuals(data):
    inter = _interaction(data["fits"])
    fits = data["fits"]
    base = fits.get("base", {})
    per_n = fits.get("imbalance_residual", {})
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        ps = [r["p"] for r in rows]
        resid = [r["imbalance_mean"] * r["p"]
                 - (inter["m"] * r["rot_per_node_mean"] * r["n"]
                    + inter["lambda"] * r["n"] * r["p"]) for r in rows]
        line, = ax.plot(ps, resid, marker="o", markersize=3,
                        linestyle="none", label="n=%d" % n)
        entry = per_n.get(str(n), {})
        if "residual" in entry and "A" in base:
            grid = np.linspace(0.0, 1.0, 400)
            ax.plot(grid, io.eval_cubic(grid, base, entry["warp"],
                                        entry["residual"]),
                    color=line.get_color(), linewidth=1)
    ax.axhline(0.0, color="gray", linewidth=0.6)
    ax.set_xlabel("p")
    ax.set_ylabel("interaction residual (counts)")
    ax.legend(fontsize=8)
    ax.set_title("Per-N interaction residuals with warped-cubic fits")
    return fig


def fig_k_scaling(data):
    fits = data["fits"]
    pairs = [(int(n), abs(entry["residual"]["k"]))
             for n, entry in fits.get("imbalance_residual", {}).items()
             if isinstance(entry, dict) and "residual" in entry]
    if not pairs:
        raise SkipFigure("no per-N imbalance residual fits in fits.json")
    pairs.sort()
    fig, (ax,) = _fig()
    ns = [n for n, _ in pairs]
    ks = [k for _, k in pairs]
    ax.plot(ns, ks, "o", label="|k(N)|")
    scaling = fits.get("k_scaling", {})
    if "exponent" in scaling:
        grid = np.geomspace(min(ns), max(ns), 100)
        ax.plot(grid, scaling["coefficient"] * grid ** scaling["exponent"],
                "k--", linewidth=1,
                label="%.3g * N^%.3g" % (scaling["coefficient"],
                                         scaling["exponent"]))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("|k|")
    ax.legend(fontsize=8)
    ax.set_title("Cubic amplitude versus tree size")
    return fig


# --- depth ---------------------------------------------------------------------

def fig_avg_depth_vs_p(data):
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        ax.plot(*_series(_positive_p(rows), "p", "avg_depth_mean"),
                marker="o", markersize=3, linewidth=1, label="n=%d" % n)
    ax.set_xscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("mean average depth")
    ax.legend(fontsize=8)
    ax.set_title("Average node depth versus repair probability")
    return fig


def fig_depth_variance_and_rescale(data):
    fig, (ax1, ax2) = _fig(ncols=2)
    for n, rows in io.by_n(data["aggregate"]):
        rows = [r for r in _positive_p(rows) if r["avg_depth_var"] > 0.0]
        if not rows:
            continue
        ax1.plot(*_series(rows, "p", "avg_depth_var"), marker="o",
                 markersize=3, linewidth=1, label="n=%d" % n)
        ax2.plot([r["p"] * r["n"] for r in rows],
                 [r["avg_depth_var"] for r in rows], marker="o",
                 markersize=3, linewidth=1, label="n=%d" % n)
    for ax, xlabel in ((ax1, "p"), (ax2, "p * N")):
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("var(average depth)")
        ax.legend(fontsize=7)
    ax1.set_title("Depth variance")
    ax2.set_title("Rescaled by p * N")
    return fig


def fig_collapse_attempts(data):
    fig, (ax,) = _fig()
    for n, rows in io.by_n(data["aggregate"]):
        rows = _positive_p(rows)
        ax.plot([r["p"] * r["n"] for r in rows],
                [r["avg_depth_mean"] / math.log2(r["n"]) for r in rows],
                marker="o", markersize=3, linewidth=1, label="n=%d" % n)
    ax.set_xscale("log")
    ax.set_xlabel("p * N")
    ax.set_ylabel("mean avg depth / log2(N)")
    ax.legend(fontsize=8)
    ax.set_title("Depth-curve collapse under the p*N rescaling")
    return fig


# --- frontier ------------------------------------------------------------------

def fig_efficiency_curve(data):
    fig, (ax,) = _fig()
    knees = {row["n"]: row for row in data.get("knees") or []}
    for n, rows in io.by_n(data["pareto"]):
        rows = [r for r in rows if r.get("efficiency") not in (None, 0.0)
                and r["efficiency"] > 0.0 and r["p"] > 0.0]
        if not rows:
            continue
        line, = ax.plot(*_series(rows, "p", "efficiency"), marker="o",
                        markersize=3, linewidth=1, label="n=%d" % n)
        knee = knees.get(n, {})
        if knee.get("knee_p"):
            ax.axvline(knee["knee_p"], color=line.get_color(),
                       linestyle=":", linewidth=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("depth gained per rotation spent")
    ax.legend(fontsize=8)
    ax.set_title("Marginal efficiency; dotted lines mark the knees")
    return fig


def fig_pareto_frontier(data):
    fig, (ax,) = _fig()
    knees = {row["n"]: row for row in data.get("knees") or []}
    for n, rows in io.by_n(data["pareto"]):
        line, = ax.plot(*_series(rows, "rot_norm", "depth_norm"), marker="o",
                        markersize=3, linewidth=1, label="n=%d" % n)
        knee = knees.get(n, {})
        if knee.get("pareto_rot") is not None:
            ax.plot([knee["pareto_rot"]], [knee["pareto_depth"]], marker="D",
                    markersize=7, color=line.get_color(),
                    markerfacecolor="none")
    ax.set_xlabel("rotation cost (normalized to p=1)")
    ax.set_ylabel("average depth (normalized to p=1)")
    ax.legend(fontsize=8)
    ax.set_title("Cost-benefit frontier; diamonds mark the curvature knees")
    return fig


# --- heights and sigma distributions -------------------------------------------

def fig_height_exceedance(data):
    runs = data["runs"]
    groups = {}
    for r in runs:
        groups.setdefault((r["n"], r["p"]), []).append(r["height"])
    fig, (ax,) = _fig()
    ns = sorted({n for n, _ in groups})
    for n in ns:
        for margin, style in ((1, "-"), (2, "--")):
            pts = []
            for (gn, p), heights in sorted(groups.items()):
                if gn != n or p <= 0.0:
                    continue
                mean = sum(heights) / len(heights)
                frac = sum(1 for h in heights if h >= mean + margin) / len(heights)
                pts.append((p, frac))
            if pts:
                ax.plot([p for p, _ in pts], [f for _, f in pts], style,
                        marker="o", markersize=2.5, linewidth=1,
                        label="n=%d, mean+%d" % (n, margin))
    ax.set_xscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("P(height >= mean + margin)")
    ax.legend(fontsize=7)
    ax.set_title("Height exceedance probabilities")
    return fig


def fig_sigma_vs_p_and_collapse(data):
    fig, (ax1, ax2) = _fig(ncols=2)
    for n, rows in io.by_n(data["aggregate"]):
        rows = _positive_p(rows)
        ax1.plot(*_series(rows, "p", "sigma_mean"), marker="o", markersize=3,
                 linewidth=1, label="n=%d" % n)
        ax2.plot([r["p"] * r["n"] for r in rows],
                 [r["sigma_mean"] for r in rows], marker="o", markersize=3,
                 linewidth=1, label="n=%d" % n)
    for ax, xlabel in ((ax1, "p"), (ax2, "p * N")):
        ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("mean sigma")
        ax.legend(fontsize=7)
    ax1.set_title("Global imbalance sigma")
    ax2.set_title("Rescaled by p * N")
    return fig


def fig_sigma_distributions(data):
    n, runs = _largest_n_runs(data["runs"])
    choices = _sigma_p_choices(runs)
    fig, (ax,) = _fig()
    for p in choices:
        sigmas = [r["sigma"] for r in runs if r["p"] == p]
        ax.hist(sigmas, bins=20, histtype="step", density=True,
                label="p=%.4g" % p)
    ax.set_xlabel("sigma")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    ax.set_title("Sigma distributions at n=%d" % n)
    return fig


def fig_sigma_ecdfs(data):
    n, runs = _largest_n_runs(data["runs"])
    choices = _sigma_p_choices(runs)
    fig, (ax,) = _fig()
    for p in choices:
        sigmas = sorted(r["sigma"] for r in runs if r["p"] == p)
        fracs = [(i + 1) / len(sigmas) for i in range(len(sigmas))]
        ax.step(sigmas, fracs, where="post", label="p=%.4g" % p)
    ax.set_xlabel("sigma")
    ax.set_ylabel("empirical CDF")
    ax.legend(fontsize=8)
    ax.set_title("Sigma ECDFs at n=%d" % n)
    return fig


def fig_sigma_tails(data):
    n, runs = _largest_n_runs(data["runs"])
    choices = _sigma_p_choices(runs)
    fig, (ax,) = _fig()
    drew = False
    for p in choices:
        sigmas = sorted(r["sigma"] for r in runs if r["p"] == p)
        total = len(sigmas)
        pts = [(t, sum(1 for s in sigmas if s > t) / total)
               for t in sorted(set(sigmas))]
        pts = [(t, frac) for t, frac in pts if frac > 0.0]
        if pts:
            ax.plot([t for t, _ in pts], [f for _, f in pts], marker="o",
                    markersize=2.5, linewidth=1, label="p=%.4g" % p)
            drew = True
    if not drew:
        raise SkipFigure("sigma samples have no positive tail")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("P(sigma > t)")
    ax.legend(fontsize=8)
    ax.set_title("Sigma tail probabilities at n=%d" % n)
    return fig


# --- registry ------------------------------------------------------------------

_LOADERS = {
    "runs": io.load_runs,
    "aggregate": io.load_aggregate,
    "fits": io.load_fits,
    "pareto": io.load_pareto,
    "knees": io.load_knees,
}

REGISTRY = {
    "rotations_vs_p": (fig_rotations_vs_p, ("aggregate",), ("fits",)),
    "rotation_residual": (fig_rotation_residual, ("aggregate", "fits"), ()),
    "warp_comparison": (fig_warp_comparison, ("fits",), ()),
    "imbalance_overlay": (fig_imbalance_overlay, ("aggregate", "fits"), ()),
    "imbalance_residuals": (fig_imbalance_residuals, ("aggregate", "fits"), ()),
    "k_scaling": (fig_k_scaling, ("fits",), ()),
    "avg_depth_vs_p": (fig_avg_depth_vs_p, ("aggregate",), ()),
    "depth_variance_and_rescale": (fig_depth_variance_and_rescale,
                                   ("aggregate",), ()),
    "collapse_attempts": (fig_collapse_attempts, ("aggregate",), ()),
    "efficiency_curve": (fig_efficiency_curve, ("pareto",), ("knees",)),
    "pareto_frontier": (fig_pareto_frontier, ("pareto",), ("knees",)),
    "height_exceedance": (fig_height_exceedance, ("runs",), ()),
    "sigma_vs_p_and_collapse": (fig_sigma_vs_p_and_collapse,
                                ("aggregate",), ()),
    "sigma_distributions": (fig_sigma_distributions, ("runs",), ()),
    "sigma_ecdfs": (fig_sigma_ecdfs, ("runs",), ()),
    "sigma_tails": (fig_sigma_tails, ("runs",), ()),
}

FIGURE_IDS = tuple(REGISTRY)


def build(figure_id, input_dir):
    """Load inputs and build the matplotlib Figure for one figure id.

    Raises KeyError for unknown ids, MissingInputError when a required
    file is absent, and SkipFigure when inputs lack the needed data.
    The caller owns the figure and should close it after saving.
    """
    fn, required, optional = REGISTRY[figure_id]
    data = {name: _LOADERS[name](input_dir) for name in required}
    for name in optional:
        try:
            data[name] = _LOADERS[name](input_dir)
        except io.MissingInputError:
            data[name] = None
    fig = fn(data)
    footer = io.load_config_hash(input_dir)
    fig.text(0.99, 0.01, "config %s" % (footer or "unknown"),
             ha="right", va="bottom", fontsize=5, color="0.55")
    fig.tight_layout(rect=(0, 0.02, 1, 1))
    return fig
