"""Sweep figure: one metric line per policy across the swept axis."""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from specplots.io import SWEEP_COLUMNS, infer_axis_label, read_columns

# metric name -> (mean column, ci column, y-axis label)
METRICS = {
    "throughput": ("mean_throughput", "ci_throughput", "throughput (tokens/s)"),
    "energy": ("mean_energy", "ci_energy", "energy per step (J)"),
}


def build_sweep_figure(table, metric, axis_label="axis value", legend_map=None):
    """Builds the figure without touching the filesystem.

    Args:
      table: dict of sweep.csv columns as returned by `read_columns`.
      metric: "throughput" or "energy".
      axis_label: x-axis label (the swept config key when known).
      legend_map: optional {policy name: legend label} renames.

    Returns:
      A matplotlib Figure with one error-bar line per policy.

    Raises:
      ValueError: unknown metric name.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}' (choose from {sorted(METRICS)})")
    mean_column, ci_column, ylabel = METRICS[metric]
    legend_map = legend_map or {}

    policies = list(dict.fromkeys(table["policy"]))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for policy in policies:
        points = sorted(
            (table["axis_value"][i], table[mean_column][i], table[ci_column][i])
            for i, name in enumerate(table["policy"])
            if name == policy
        )
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        errs = [p[2] for p in points]
        ax.errorbar(
            xs, ys, yerr=errs, marker="o", capsize=3,
            label=legend_map.get(policy, policy),
        )
    ax.set_xlabel(axis_label)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    return fig


def plot_sweep(sweep_csv, metric, out_png, legend_map=None):
    """Renders sweep.csv to a PNG; returns the output path."""
    table = read_columns(sweep_csv, SWEEP_COLUMNS, text_columns=("policy",))
    fig = build_sweep_figure(
        table, metric, axis_label=infer_axis_label(sweep_csv), legend_map=legend_map
    )
    out = Path(out_png)
    fig.savefig(out, dpi=300)
    plt.close(fig)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Plot one metric line per policy from a sweep.csv"
    )
    parser.add_argument("sweep_csv", help="sweep.csv produced by the simulator CLI")
    parser.add_argument("metric", choices=sorted(METRICS), help="column family to plot")
    parser.add_argument("out_png", help="output PNG path")
    args = parser.parse_args(argv)
    try:
        out = plot_sweep(args.sweep_csv, args.metric, args.out_png)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
