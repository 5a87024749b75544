"""Step-trace figure: draft budget and queue backlog per step for two runs."""

import argparse
import sys
from pathlib import Path
from statistics import fmean

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from specplots.io import RUN_COLUMNS, infer_run_label, read_columns


def build_traces_figure(runs):
    """Builds the dual-panel figure without touching the filesystem.

    Args:
      runs: sequence of (label, table) pairs, each table holding the run CSV
        columns k, gamma_budget, queue_j.

    Returns:
      A matplotlib Figure with a draft-budget panel (top) and a queue panel
      (bottom); each trace's legend entry carries its mean budget.
    """
    fig, (ax_budget, ax_queue) = plt.subplots(
        2, 1, sharex=True, figsize=(6.4, 5.6)
    )
    for label, table in runs:
        mean_budget = fmean(table["gamma_budget"])
        ax_budget.step(
            table["k"], table["gamma_budget"], where="post",
            label=f"{label} (mean budget {mean_budget:.2f})",
        )
        ax_queue.plot(table["k"], table["queue_j"], label=label)
    ax_budget.set_ylabel("draft budget (tokens)")
    ax_budget.legend()
    ax_queue.set_xlabel("step k")
    ax_queue.set_ylabel("queue backlog (J)")
    ax_queue.legend()
    fig.tight_layout()
    return fig


def plot_step_traces(run_csv_a, run_csv_b, out_png, label_a=None, label_b=None):
    """Renders two run CSVs of equal length to a dual-panel PNG.

    Args:
      run_csv_a: first run CSV (e.g. the smaller-V run).
      run_csv_b: second run CSV.
      out_png: output PNG path.
      label_a: legend label for the first run; inferred from run metadata
        when omitted.
      label_b: same for the second run.

    Returns:
      The output path.

    Raises:
      ValueError: schema mismatch, empty runs, or different step counts.
    """
    table_a = read_columns(run_csv_a, RUN_COLUMNS)
    table_b = read_columns(run_csv_b, RUN_COLUMNS)
    steps_a = len(table_a["k"])
    steps_b = len(table_b["k"])
    if steps_a != steps_b:
        raise ValueError(f"step counts differ: {steps_a} vs {steps_b}")
    runs = [
        (label_a or infer_run_label(run_csv_a), table_a),
        (label_b or infer_run_label(run_csv_b), table_b),
    ]
    fig = build_traces_figure(runs)
    out = Path(out_png)
    fig.savefig(out, dpi=300)
    plt.close(fig)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Plot per-step draft budget and queue backlog for two runs"
    )
    parser.add_argument("run_csv_a", help="first run CSV")
    parser.add_argument("run_csv_b", help="second run CSV")
    parser.add_argument("out_png", help="output PNG path")
    parser.add_argument("--label-a", help="legend label for the first run")
    parser.add_argument("--label-b", help="legend label for the second run")
    args = parser.parse_args(argv)
    try:
        out = plot_step_traces(
            args.run_csv_a, args.run_csv_b, args.out_png,
            label_a=args.label_a, label_b=args.label_b,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
