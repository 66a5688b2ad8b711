"""File-based pipeline driver: simulate -> fit -> pareto -> report.

Every subcommand is a pure function of its input files and flags, so
reruns reproduce outputs byte-exactly. Exit codes: 0 success, 2 for
usage/config/data problems, 3 for I/O failures.
"""

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict

from . import __version__, fitting, harness, pareto

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

# Headline values from the full-scale study (N up to 512,000, dense grids,
# 200+ runs per point), shown for side-by-side comparison in reports.
FULL_SCALE_REFERENCE = {
    "base_A": 0.67,
    "base_b": 5.72,
    "base_pearson": 0.993523,
    "base_mse": 3.553e-4,
    "combined_mse": 3.396e-6,
    "interaction_m": 0.703972,
    "interaction_lambda": -0.020980,
    "interaction_pearson": 0.999979,
    "cosine_similarity": 0.182,
    "knee_p_n8000": 0.0058,
    "pareto_p_n8000": 0.0298,
}


class PipelineError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _require_file(path):
    if not os.path.isfile(path):
        raise PipelineError("missing input file: %s" % path, EXIT_USAGE)


def _prepare_output(out_dir, names, force):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise PipelineError("cannot create %s: %s" % (out_dir, exc), EXIT_IO)
    if not force:
        clashes = [n for n in names if os.path.exists(os.path.join(out_dir, n))]
        if clashes:
            raise PipelineError(
                "refusing to overwrite %s in %s (use --force)"
                % (", ".join(clashes), out_dir), EXIT_USAGE)
    return {n: os.path.join(out_dir, n) for n in names}


def _load_config(path, overrides):
    _require_file(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    for item in overrides:
        if "=" not in item:
            raise PipelineError("override must be key=value: %r" % item, EXIT_USAGE)
        text += "\n" + item.replace("=", " = ", 1)
    try:
        config = harness.parse_config(text)
    except harness.ConfigError as exc:
        raise PipelineError("bad config: %s" % exc, EXIT_USAGE)
    if "PAVL_SEED" in os.environ:
        config.master_seed = int(os.environ["PAVL_SEED"])
    return config


def _workers(args):
    if args.workers is not None:
        return args.workers
    if "PAVL_THREADS" in os.environ:
        return int(os.environ["PAVL_THREADS"])
    return os.cpu_count() or 1


def cmd_simulate(args):
    config = _load_config(args.config, args.override)
    paths = _prepare_output(
        args.out, ["runs.csv", "aggregate.csv", "manifest.txt"], args.force)
    records = harness.run_sweep(config, workers=_workers(args))
    points = harness.aggregate(records, expected_runs=config.runs_per_point)
    try:
        harness.write_runs_csv(records, paths["runs.csv"])
        harness.write_aggregate_csv(points, paths["aggregate.csv"])
        config_text = harness.config_to_text(config)
        digest = hashlib.sha256(config_text.encode("utf-8")).hexdigest()
        with open(paths["manifest.txt"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("tool_version = %s\n" % __version__)
            fh.write("config_sha256 = %s\n" % digest)
            fh.write("master_seed = %d\n" % config.master_seed)
            fh.write("records = %d\n" % len(records))
            fh.write(config_text)
    except OSError as exc:
        raise PipelineError("write failed: %s" % exc, EXIT_IO)
    return EXIT_OK


def _fit_document(points, records):
    """All fits from one sweep's aggregate points and run records."""
    doc = {}
    by_n = {}
    for a in points:
        by_n.setdefault(a.n, []).append(a)

    base_points = [(a.p, a.rot_per_node_mean) for a in points]
    base, base_stats = fitting.fit_base(base_points)
    doc["base"] = {"A": base.A, "b": base.b, "stats": asdict(base_stats)}

    resid_points = [(p, y - fitting.eval_base(p, base)) for p, y in base_points]
    doc["rotation_residual"] = {}
    try:
        warp, res, comb_stats = fitting.fit_residual(resid_points, base)
        doc["rotation_residual"]["pooled"] = {
            "warp": asdict(warp), "residual": asdict(res),
            "stats": asdict(comb_stats)}
    except fitting.FitError as exc:
        doc["rotation_residual"]["pooled"] = {"error": str(exc)}

    doc["rotation_residual"]["per_n"] = {}
    rotation_crossings = {}
    for n, group in sorted(by_n.items()):
        pts = [(a.p, a.rot_per_node_mean - fitting.eval_base(a.p, base))
               for a in group]
        try:
            warp_n, res_n, stats_n = fitting.fit_residual(pts, base)
        except fitting.FitError as exc:
            doc["rotation_residual"]["per_n"][str(n)] = {"error": str(exc)}
            continue
        cross = fitting.crossing_points(base, warp_n, res_n)
        rotation_crossings[n] = cross
        doc["rotation_residual"]["per_n"][str(n)] = {
            "warp": asdict(warp_n), "residual": asdict(res_n),
            "stats": asdict(stats_n),
            "p_star_a": cross.p_star_a, "p_star_b": cross.p_star_b}

    try:
        inter, inter_stats = fitting.fit_interaction(records)
        doc["interaction"] = {
            "m": inter.m, "lambda": inter.lam,
            "m_stderr": inter.m_stderr, "lambda_stderr": inter.lam_stderr,
            "stats": asdict(inter_stats)}
    except fitting.FitError as exc:
        inter = None
        doc["interaction"] = {"error": str(exc)}

    doc["imbalance_residual"] = {}
    imbalance_crossings = {}
    k_pairs = []
    if inter is not None:
        imb_points = {
            n: [(a.p,
                 a.imbalance_mean * a.p
                 - (inter.m * a.rot_per_node_mean * a.n + inter.lam * a.n * a.p))
                for a in group]
            for n, group in by_n.items()}
        per_n = {}
        for n, pts in sorted(imb_points.items()):
            try:
                per_n.update(fitting.fit_imbalance_residual({n: pts}, base))
            except fitting.FitError as exc:
                doc["imbalance_residual"][str(n)] = {"error": str(exc)}
        for n, (warp_n, res_n, stats_n) in per_n.items():
            cross = fitting.crossing_points(base, warp_n, res_n)
            imbalance_crossings[n] = cross
            k_pairs.append((n, abs(res_n.k)))
            doc["imbalance_residual"][str(n)] = {
                "warp": asdict(warp_n), "residual": asdict(res_n),
                "stats": asdict(stats_n),
                "p_star_a": cross.p_star_a, "p_star_b": cross.p_star_b}

    doc["delta_crossings"] = {}
    for n in sorted(set(rotation_crossings) & set(imbalance_crossings)):
        rc, ic = rotation_crossings[n], imbalance_crossings[n]
        doc["delta_crossings"][str(n)] = {
            "delta_p_star_a": (None if None in (rc.p_star_a, ic.p_star_a)
                               else ic.p_star_a - rc.p_star_a),
            "delta_p_star_b": (None if None in (rc.p_star_b, ic.p_star_b)
                               else ic.p_star_b - rc.p_star_b)}

    base_curve = [fitting.eval_base(p, base) for p, _ in base_points]
    resid_curve = [y for _, y in resid_points]
    try:
        doc["cosine_similarity_residual_vs_base"] = fitting.cosine_similarity(
            resid_curve, base_curve)
    except ValueError as exc:
        doc["cosine_similarity_residual_vs_base"] = None

    if len(k_pairs) >= 3:
        try:
            exponent, coefficient, r2 = fitting.fit_k_scaling(k_pairs)
            doc["k_scaling"] = {"exponent": exponent, "coefficient": coefficient,
                                "r_squared": r2, "note": "exploratory power-law probe"}
        except ValueError as exc:
            doc["k_scaling"] = {"error": str(exc)}
    return doc


def cmd_fit(args):
    _require_file(args.aggregate)
    _require_file(args.runs)
    paths = _prepare_output(
        args.out,
        ["fits.json", "zeroes.csv", "crossings.csv", "imbalance_params.csv",
         "delta_crossings.csv"],
        args.force)
    try:
        points = harness.read_aggregate_csv(args.aggregate)
        records = harness.read_runs_csv(args.runs)
    except harness.ConfigError as exc:
        raise PipelineError(str(exc), EXIT_USAGE)
    try:
        doc = _fit_document(points, records)
    except fitting.FitError as exc:
        raise PipelineError("fit failed: %s" % exc, EXIT_USAGE)
    try:
        with open(paths["fits.json"], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_table(paths["zeroes.csv"], "n,a,b", [
            (n, entry["residual"]["a"], entry["residual"]["b"])
            for n, entry in sorted(doc["rotation_residual"]["per_n"].items(),
                                   key=lambda kv: int(kv[0]))
            if "residual" in entry])
        _write_table(paths["crossings.csv"], "n,p_star_a,p_star_b", [
            (n, entry["p_star_a"], entry["p_star_b"])
            for n, entry in sorted(doc["rotation_residual"]["per_n"].items(),
                                   key=lambda kv: int(kv[0]))
            if "p_star_a" in entry])
        _write_table(paths["imbalance_params.csv"], "n,a,b,p_star_a,p_star_b,d1", [
            (n, e["residual"]["a"], e["residual"]["b"],
             e["p_star_a"], e["p_star_b"], e["warp"]["d1"])
            for n, e in sorted(doc["imbalance_residual"].items(),
                               key=lambda kv: kv[0])
            if isinstance(e, dict) and "residual" in e])
        _write_table(paths["delta_crossings.csv"],
                     "n,delta_p_star_a,delta_p_star_b", [
            (n, e["delta_p_star_a"], e["delta_p_star_b"])
            for n, e in sorted(doc["delta_crossings"].items(),
                               key=lambda kv: int(kv[0]))])
    except OSError as exc:
        raise PipelineError("write failed: %s" % exc, EXIT_IO)
    return EXIT_OK


def _write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else
                              (v if isinstance(v, str) else repr(v))
                              for v in row) + "\n")


def cmd_pareto(args):
    _require_file(args.aggregate)
    paths = _prepare_output(args.out, ["pareto.csv", "knees.csv"], args.force)
    try:
        points = harness.read_aggregate_csv(args.aggregate)
    except harness.ConfigError as exc:
        raise PipelineError(str(exc), EXIT_USAGE)
    by_n = {}
    for a in points:
        by_n.setdefault(a.n, []).append(a)
    rows = []
    knees = []
    for n, group in sorted(by_n.items()):
        if not any(a.p == 1.0 for a in group):
            raise PipelineError(
                "aggregate lacks a p = 1 point for n = %d" % n, EXIT_USAGE)
        smooth, curve, report = pareto.analyze_frontier(
            group, bin_count=args.bins, window=args.window,
            threshold_fraction=args.threshold)
        eff_by_p = dict(curve)
        for q in smooth:
            eff = eff_by_p.get(q.p)
            rows.append((str(n), format(q.p, ".10g"), repr(q.rot_norm),
                         repr(q.depth_norm),
                         None if eff is None else repr(eff)))
        knees.append((str(n), report.knee_p, report.knee_rot,
                      report.knee_depth, report.pareto_p, report.pareto_rot,
                      report.pareto_depth))
    try:
        _write_table(paths["pareto.csv"], "n,p,rot_norm,depth_norm,efficiency",
                     rows)
        _write_table(paths["knees.csv"],
                     "n,knee_p,knee_rot,knee_depth,pareto_p,pareto_rot,"
                     "pareto_depth", knees)
    except OSError as exc:
        raise PipelineError("write failed: %s" % exc, EXIT_IO)
    return EXIT_OK


def cmd_report(args):
    fits_path = os.path.join(args.out, "fits.json")
    knees_path = os.path.join(args.out, "knees.csv")
    for path in (fits_path, knees_path):
        _require_file(path)
    with open(fits_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    with open(knees_path, encoding="utf-8") as fh:
        knee_lines = fh.read().strip().splitlines()[1:]

    ref = FULL_SCALE_REFERENCE
    lines = ["p-AVL pipeline summary", "=" * 40, ""]

    def row(label, value, reference):
        value = "n/a" if value is None else "%.6g" % value
        lines.append("%-34s %12s   (full-scale reference %g)"
                     % (label, value, reference))

    base = doc.get("base", {})
    row("base saturation A", base.get("A"), ref["base_A"])
    row("base rate b", base.get("b"), ref["base_b"])
    row("base Pearson", base.get("stats", {}).get("pearson"), ref["base_pearson"])
    row("base MSE", base.get("stats", {}).get("mse"), ref["base_mse"])
    pooled = doc.get("rotation_residual", {}).get("pooled", {})
    row("combined MSE", pooled.get("stats", {}).get("mse"), ref["combined_mse"])
    inter = doc.get("interaction", {})
    row("interaction m", inter.get("m"), ref["interaction_m"])
    row("interaction lambda", inter.get("lambda"), ref["interaction_lambda"])
    row("interaction Pearson", inter.get("stats", {}).get("pearson"),
        ref["interaction_pearson"])
    row("cosine(residual, base)", doc.get("cosine_similarity_residual_vs_base"),
        ref["cosine_similarity"])
    lines.append("")
    lines.append("Pareto knees (per n): n, knee_p, pareto_p  "
                 "(full-scale reference at n=8000: %g, %g)"
                 % (ref["knee_p_n8000"], ref["pareto_p_n8000"]))
    for line in knee_lines:
        cols = line.split(",")
        lines.append("  %s: knee_p=%s pareto_p=%s" % (cols[0], cols[1], cols[4]))
    lines.append("")

    out_path = os.path.join(args.out, "summary.txt")
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise PipelineError("write failed: %s" % exc, EXIT_IO)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pavl", description="p-AVL sweep, fitting, and Pareto pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded (N, p) sweep")
    sim.add_argument("--config", required=True, help="flat key=value config file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="config override (repeatable)")
    sim.add_argument("--workers", type=int, default=None,
                     help="worker processes (default: CPU count or PAVL_THREADS)")
    sim.add_argument("--force", action="store_true", help="overwrite outputs")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit all models to sweep outputs")
    fit.add_argument("--aggregate", required=True)
    fit.add_argument("--runs", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--force", action="store_true")
    fit.set_defaults(func=cmd_fit)

    par = sub.add_parser("pareto", help="frontier, efficiency curve, knees")
    par.add_argument("--aggregate", required=True)
    par.add_argument("--out", required=True)
    par.add_argument("--bins", type=int, default=40)
    par.add_argument("--window", type=int, default=3)
    par.add_argument("--threshold", type=float, default=0.05)
    par.add_argument("--force", action="store_true")
    par.set_defaults(func=cmd_pareto)

    rep = sub.add_parser("report", help="summarize fit and pareto outputs")
    rep.add_argument("--out", required=True,
                     help="directory holding fits.json and knees.csv")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.code


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
