"""Figure rendering for the simulator's versioned CSV/JSON outputs.

This package is a pure consumer of the files written by the `specsim` CLI
(run CSVs, summary.json, sweep.csv, sweep.json, calibration bins). It never
imports the simulator and never recomputes simulation quantities; every
figure is a direct view over documented CSV columns.
"""

from specplots.calibration import build_calibration_figure, plot_calibration
from specplots.sweep import build_sweep_figure, plot_sweep
from specplots.traces import build_traces_figure, plot_step_traces

__version__ = "0.1.0"

__all__ = [
    "build_calibration_figure",
    "build_sweep_figure",
    "build_traces_figure",
    "plot_calibration",
    "plot_step_traces",
    "plot_sweep",
]
