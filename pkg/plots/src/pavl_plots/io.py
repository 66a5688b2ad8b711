"""Readers for the pipeline's output files.

These parse the CSV/JSON/manifest formats written by the `pavl` command;
nothing here imports the simulation library itself, so the plots package
works against any directory with schema-compatible files.
"""

import csv
import json
import os

import numpy as np


class MissingInputError(FileNotFoundError):
    """A required pipeline output file is absent."""


_RUNS_INTS = ("n", "run_index", "seed", "rotations_total", "single_rotations",
              "double_rotations", "imbalance_events", "height")


def _read_csv(path, int_fields=()):
    if not os.path.isfile(path):
        raise MissingInputError(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out = {}
            for key, val in row.items():
                if val is None or val == "":
                    out[key] = None
                elif key in int_fields:
                    out[key] = int(val)
                else:
                    out[key] = float(val)
            rows.append(out)
    return rows


def load_runs(input_dir):
    return _read_csv(os.path.join(input_dir, "runs.csv"), _RUNS_INTS)


def load_aggregate(input_dir):
    return _read_csv(os.path.join(input_dir, "aggregate.csv"), ("n", "runs"))


def load_pareto(input_dir):
    return _read_csv(os.path.join(input_dir, "pareto.csv"), ("n",))


def load_knees(input_dir):
    return _read_csv(os.path.join(input_dir, "knees.csv"), ("n",))


def load_fits(input_dir):
    path = os.path.join(input_dir, "fits.json")
    if not os.path.isfile(path):
        raise MissingInputError(path)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_config_hash(input_dir):
    """The config_sha256 line from manifest.txt, or None if unavailable."""
    path = os.path.join(input_dir, "manifest.txt")
    if not os.path.isfile(path):
        return None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("config_sha256"):
                return line.split("=", 1)[1].strip()
    return None


def by_n(rows):
    """Rows grouped by their n column, ascending, each group sorted by p."""
    groups = {}
    for row in rows:
        groups.setdefault(row["n"], []).append(row)
    return [(n, sorted(group, key=lambda r: r.get("p", 0.0)))
            for n, group in sorted(groups.items())]


# --- model curves from fits.json parameter blocks ------------------------------

def eval_base(p, base):
    p = np.asarray(p, dtype=float)
    return base["A"] * (1.0 - np.exp(-base["b"] * p))


def eval_warp(f, warp):
    f = np.asarray(f, dtype=float)
    num = f + warp["d1"] * f * f
    den = 1.0 + warp["a1"] * f + warp["a2"] * f * f + warp["a3"] * f ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(np.abs(den) < 1e-12, np.nan, out)


def eval_cubic(p, base, warp, residual):
    w = eval_warp(eval_base(p, base), warp)
    return residual["k"] * w * (w - residual["a"]) * (w - residual["b"])
