"""Persistence for simulation runs: per-step CSV logs and JSON sidecars.

The CSV schema is the package's stable on-disk interface; downstream tooling
parses these files without importing this package. Floats are written with
repr so a save/load/save cycle is byte identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import SimConfig, make_config
from .policies import Policy
from .simulator import RunRecord

FORMAT_VERSION = 1

RUN_HEADER = (
    "k",
    "gamma_budget",
    "gamma_sent",
    "hits",
    "latency_s",
    "energy_j",
    "uplink_bits",
    "queue_j",
    "gain",
)

_INT_COLUMNS = {"k", "gamma_budget", "gamma_sent", "hits", "uplink_bits"}


def _fmt(value: float) -> str:
    # repr gives the shortest string that round-trips the exact double.
    return repr(float(value))


def save_run(record: RunRecord, csv_path: str | Path, sidecar_path: str | Path | None = None) -> None:
    """Write one run as a per-step CSV, optionally with a JSON sidecar.

    The sidecar carries everything the CSV cannot: format version, seed,
    policy identity, partial flag, and the resolved config snapshot.
    """
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_HEADER)
        for i in range(record.n_steps):
            writer.writerow(
                [
                    int(record.step[i]),
                    int(record.budget[i]),
                    int(record.sent[i]),
                    int(record.hits[i]),
                    _fmt(record.latency_s[i]),
                    _fmt(record.energy_j[i]),
                    int(record.uplink_bits[i]),
                    _fmt(record.queue_j[i]),
                    _fmt(record.gain[i]),
                ]
            )
    if sidecar_path is not None:
        save_sidecar(record, sidecar_path)


def sidecar_payload(record: RunRecord) -> dict:
    policy = record.policy
    return {
        "format_version": FORMAT_VERSION,
        "seed": record.seed,
        "partial": record.partial,
        "policy": {
            "kind": policy.kind,
            "name": policy.name,
            "static_gamma": policy.static_gamma,
            "static_cp": policy.static_cp,
            "dssd_gamma_max": policy.dssd_gamma_max,
            "dssd_rx_power_w": policy.dssd_rx_power_w,
        },
        "config": record.config.snapshot(),
    }


def save_sidecar(record: RunRecord, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(sidecar_payload(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_run_table(csv_path: str | Path) -> dict[str, np.ndarray]:
    """Read a run CSV into column arrays, validating the exact header."""
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{csv_path}: empty run log") from None
        if header != RUN_HEADER:
            raise ValueError(
                f"{csv_path}: bad header {header!r}, expected {RUN_HEADER!r}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{csv_path}: run log has no steps")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(RUN_HEADER):
        values = [row[j] for row in rows]
        if name in _INT_COLUMNS:
            columns[name] = np.array([int(v) for v in values], dtype=np.int64)
        else:
            columns[name] = np.array([float(v) for v in values], dtype=np.float64)
    return columns


def load_sidecar(path: str | Path) -> dict:
    with open(path) as fh:
        meta = json.load(fh)
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {version!r}")
    return meta


def load_run(csv_path: str | Path, sidecar_path: str | Path | None = None) -> RunRecord:
    """Rebuild a RunRecord from a CSV and its sidecar.

    When sidecar_path is omitted, looks for <csv stem>.json next to the CSV.
    Per-step component breakdowns are not persisted, so the rebuilt record
    carries none; consumers that need the scheduler surrogate recompute it.
    """
    csv_path = Path(csv_path)
    if sidecar_path is None:
        sidecar_path = csv_path.with_suffix(".json")
    meta = load_sidecar(sidecar_path)
    table = load_run_table(csv_path)
    config = make_config(meta["config"])
    pol = meta["policy"]
    policy = Policy(
        kind=pol["kind"],
        name=pol["name"],
        static_gamma=pol["static_gamma"],
        static_cp=pol["static_cp"],
        dssd_gamma_max=pol["dssd_gamma_max"],
        dssd_rx_power_w=pol["dssd_rx_power_w"],
    )
    hits = table["hits"]
    context = np.empty(len(hits) + 1, dtype=np.int64)
    context[0] = config.sim.initial_context
    np.cumsum(hits, out=context[1:])
    context[1:] += config.sim.initial_context
    return RunRecord(
        config=config,
        seed=int(meta["seed"]),
        policy=policy,
        partial=bool(meta["partial"]),
        step=table["k"],
        budget=table["gamma_budget"],
        sent=table["gamma_sent"],
        accepted=hits - 1,
        hits=hits,
        latency_s=table["latency_s"],
        energy_j=table["energy_j"],
        uplink_bits=table["uplink_bits"],
        queue_j=table["queue_j"],
        gain=table["gain"],
        context=context,
        components={},
    )
