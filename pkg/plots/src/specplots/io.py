"""Schema-checked readers for the simulator CLI's versioned CSV outputs."""

import csv
import json
from pathlib import Path

# Column subsets the figures are allowed to read (documented schemas only).
RUN_COLUMNS = ("k", "gamma_budget", "queue_j")
SWEEP_COLUMNS = (
    "axis_value",
    "policy",
    "mean_throughput",
    "ci_throughput",
    "mean_energy",
    "ci_energy",
)
CALIBRATION_COLUMNS = ("entropy_bin_center", "acceptance_rate", "count")

DEFAULT_AXIS_LABEL = "axis value"


def read_columns(path, required, text_columns=()):
    """Reads the required columns from a CSV, ignoring any others.

    Args:
      path: CSV file path.
      required: column names that must all be present in the header.
      text_columns: subset of `required` kept as strings; the rest parse as
        float.

    Returns:
      Dict mapping each required column name to a list of values, in row
      order.

    Raises:
      ValueError: a required column is missing, a row is truncated, or the
        file has no data rows.
      OSError: the file cannot be read.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for column in required:
            if column not in fields:
                raise ValueError(f"{path} missing column '{column}'")
        table = {column: [] for column in required}
        for row in reader:
            for column in required:
                raw = row[column]
                if raw is None or raw == "":
                    raise ValueError(f"{path} has a truncated row (column '{column}')")
                table[column].append(raw if column in text_columns else float(raw))
    if not table[required[0]]:
        raise ValueError(f"{path} has no data rows")
    return table


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return None


def infer_run_label(csv_path):
    """Legend label for a run CSV from its sidecar or run-directory metadata.

    Prefers the scheduler's throughput weight V (the quantity step-trace
    figures contrast), then the policy name; falls back to the file stem when
    no metadata is found. Sources tried: a JSON sidecar next to the CSV, then
    summary.json in the same directory.
    """
    path = Path(csv_path)
    for candidate in (path.with_suffix(".json"), path.parent / "summary.json"):
        meta = _load_json(candidate)
        if meta is None:
            continue
        config = meta.get("config")
        if isinstance(config, dict):
            v = config.get("scheduler.v")
            if isinstance(v, (int, float)):
                return f"V={v:g}"
        policy = meta.get("policy")
        if isinstance(policy, dict):
            name = policy.get("name")
            if isinstance(name, str) and name:
                return name
    return path.stem


def infer_axis_label(sweep_csv):
    """X-axis label from sweep.json next to sweep.csv, if present."""
    meta = _load_json(Path(sweep_csv).parent / "sweep.json")
    if meta is not None:
        axis = meta.get("axis")
        if isinstance(axis, str) and axis:
            return axis
    return DEFAULT_AXIS_LABEL
