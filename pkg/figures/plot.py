#!/usr/bin/env python3
"""Render capacity-trend figures from sweep CSV files.

Consumes only the public CSV schema written by the experiment harness
(``scheme,n_x,n_y,distance_m,seed,beta,num_streams,capacity_bits,duration_s``)
and draws one line per scheme with a shaded ±1 standard-error band.  Panels:

- ``fig2a``/``fig2b``: capacity versus array size ``n_x`` (linear x axis);
- ``fig2c``: capacity versus link distance in meters (logarithmic x axis).

Statistics are recomputed here from the per-seed data rows, so the script
works on any conforming CSV whether or not it carries aggregate rows.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from collections import OrderedDict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

# Keep text as text in SVG output so labels stay searchable and files small.
plt.rcParams["svg.fonttype"] = "none"

REQUIRED_COLUMNS = (
    "scheme",
    "n_x",
    "n_y",
    "distance_m",
    "seed",
    "beta",
    "num_streams",
    "capacity_bits",
    "duration_s",
)

PANELS = ("fig2a", "fig2b", "fig2c")

# Rows whose seed column holds one of these are per-point statistics appended
# by the harness, not Monte Carlo draws; they are excluded from the averages.
_STAT_SEEDS = frozenset({"mean", "stderr"})

_X_COLUMN = {"fig2a": "n_x", "fig2b": "n_x", "fig2c": "distance_m"}
_X_LABEL = {"fig2a": "array size $N_x$ (elements)",
            "fig2b": "array size $N_x$ (elements)",
            "fig2c": "distance (m)"}


class PlotError(Exception):
    """A problem with the input CSV or the requested figure."""


def read_rows(csv_path):
    """Load the CSV, check the schema, and return the per-seed data rows."""
    path = Path(csv_path)
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            fieldnames = reader.fieldnames
            if fieldnames is None:
                raise PlotError(f"empty CSV: {path}")
            for column in REQUIRED_COLUMNS:
                if column not in fieldnames:
                    raise PlotError(f"missing column '{column}' in {path}")
            rows = [row for row in reader if row["seed"] not in _STAT_SEEDS]
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PlotError(f"no data rows in {path}")
    return rows


def series_by_scheme(rows, x_column):
    """Group capacities as scheme -> x -> list of per-seed values.

    Schemes and x values keep their first-appearance order from the file,
    which the harness writes sorted, so rendering is deterministic.
    """
    series = OrderedDict()
    for row in rows:
        try:
            x = float(row[x_column])
            y = float(row["capacity_bits"])
        except (TypeError, ValueError) as exc:
            raise PlotError(
                f"non-numeric value in columns '{x_column}'/'capacity_bits': "
                f"{row[x_column]!r}, {row['capacity_bits']!r}"
            ) from exc
        series.setdefault(row["scheme"], OrderedDict()).setdefault(x, []).append(y)
    return series


def _mean_and_stderr(values):
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def build_figure(rows, panel):
    """Build the panel's figure from data rows; the caller owns closing it."""
    if panel not in PANELS:
        raise PlotError(f"unknown panel {panel!r}; choose one of {', '.join(PANELS)}")
    series = series_by_scheme(rows, _X_COLUMN[panel])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for scheme, points in series.items():
        xs = sorted(points)
        means, errs = [], []
        for x in xs:
            mean, err = _mean_and_stderr(points[x])
            means.append(mean)
            errs.append(err)
        (line,) = ax.plot(xs, means, marker="o", markersize=3.5, label=scheme)
        lo = [m - e for m, e in zip(means, errs)]
        hi = [m + e for m, e in zip(means, errs)]
        ax.fill_between(xs, lo, hi, alpha=0.2, color=line.get_color(), linewidth=0)
    if panel == "fig2c":
        ax.set_xscale("log")
    ax.set_xlabel(_X_LABEL[panel])
    ax.set_ylabel("capacity (bits)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    return fig


def render(csv_path, panel, out_path):
    """Draw one panel from a sweep CSV and write a vector image.

    All validation happens before the output file is opened, so a failed run
    leaves nothing behind.
    """
    fig = build_figure(read_rows(csv_path), panel)
    try:
        fig.savefig(out_path)
    finally:
        plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plot.py", description="Render capacity-trend figures from sweep CSVs."
    )
    parser.add_argument("--csv", required=True, help="input sweep CSV path")
    parser.add_argument("--panel", required=True, choices=PANELS,
                        help="which figure panel to draw")
    parser.add_argument("--out", required=True,
                        help="output image path (vector format, e.g. .svg)")
    args = parser.parse_args(argv)
    try:
        render(args.csv, args.panel, args.out)
    except PlotError as exc:
        print(f"plot.py: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
