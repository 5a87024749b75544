"""Calibration figure: binned empirical acceptance with the fitted decay curve."""

import argparse
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from specplots.io import CALIBRATION_COLUMNS, read_columns


def build_calibration_figure(bins, coeff):
    """Builds the figure without touching the filesystem.

    Args:
      bins: dict of calibration CSV columns (entropy_bin_center,
        acceptance_rate, count) as returned by `read_columns`.
      coeff: acceptance decay coefficient; the overlay is exp(-coeff * H).

    Returns:
      A matplotlib Figure with one scatter of bins and one overlay curve.

    Raises:
      ValueError: non-positive or non-finite coefficient.
    """
    if not math.isfinite(coeff) or coeff <= 0.0:
        raise ValueError("acceptance coefficient must be positive and finite")
    centers = bins["entropy_bin_center"]
    rates = bins["acceptance_rate"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.scatter(centers, rates, zorder=3, label="empirical bins")
    grid = np.linspace(0.0, 1.05 * max(centers), 200)
    ax.plot(grid, np.exp(-coeff * grid), color="tab:orange", label=f"exp(-{coeff:g}H)")
    ax.set_xlabel("entropy H (nats)")
    ax.set_ylabel("acceptance rate")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    return fig


def plot_calibration(coeff, bins_csv, out_png):
    """Renders a calibration-bins CSV to a PNG; returns the output path."""
    bins = read_columns(bins_csv, CALIBRATION_COLUMNS)
    fig = build_calibration_figure(bins, coeff)
    out = Path(out_png)
    fig.savefig(out, dpi=300)
    plt.close(fig)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Plot binned empirical acceptance against exp(-coeff*H)"
    )
    parser.add_argument("bins_csv", help="calibration bins CSV from the simulator CLI")
    parser.add_argument("out_png", help="output PNG path")
    parser.add_argument(
        "--coeff", type=float, default=0.35, help="acceptance decay coefficient"
    )
    args = parser.parse_args(argv)
    try:
        out = plot_calibration(args.coeff, args.bins_csv, args.out_png)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
