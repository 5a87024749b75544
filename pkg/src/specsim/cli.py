"""Command-line front end: run, sweep, verify, validate-config, calibrate.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
3 empirical bound violation (verify only).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, load_config, make_config
from .generation import GAMMA_SAMPLER, calibration_bins
from .oracle import offline_oracle, theorem_check
from .policies import Policy, parse_policy_name, policy_from_config
from .rng import derive_seed, stream_generator
from .runlog import FORMAT_VERSION, save_run
from .simulator import RunRecord, aggregate, run

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_BOUND = 3

# Namespaces for deriving per-round and per-instance seeds from the master
# seed, so rounds and verify instances never share randomness.
_ROUND_NS = 1
_VERIFY_NS = 2

# Small-horizon profile applied by `verify` to every key the user did not set
# explicitly: the exhaustive benchmark enumerates gamma0^steps sequences.
_VERIFY_PROFILE = {"sim.steps": 4, "scheduler.gamma0": 3, "scheduler.v": 0.02}


def round_seed(master_seed: int, round_index: int) -> int:
    return derive_seed(master_seed, _ROUND_NS, round_index)


def instance_seed(master_seed: int, instance_index: int) -> int:
    return derive_seed(master_seed, _VERIFY_NS, instance_index)


def _parse_sets(pairs: list[str] | None, parser: argparse.ArgumentParser) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            parser.error(f"--set expects KEY=VALUE, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _build_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> SimConfig:
    overrides = _parse_sets(getattr(args, "set", None), parser)
    if getattr(args, "seed", None) is not None:
        overrides["sim.seed"] = args.seed
    if args.config:
        return load_config(args.config, extra=overrides)
    return make_config(overrides)


def _parse_policy(name: str, config: SimConfig) -> Policy:
    try:
        return parse_policy_name(name, config)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None


def _write_run_outputs(
    outdir: Path,
    config: SimConfig,
    policy: Policy,
    master_seed: int,
    seeds: list[int],
    records: list[RunRecord],
) -> dict:
    """Write round CSVs plus summary.csv and summary.json; return the summary."""
    outdir.mkdir(parents=True, exist_ok=True)
    round_files = []
    for index, record in enumerate(records):
        name = f"round_{index:03d}.csv"
        save_run(record, outdir / name)
        round_files.append(name)

    metric_rows = [record.metrics().as_dict() for record in records]
    metric_keys = list(metric_rows[0])
    with open(outdir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "seed"] + metric_keys)
        for index, (seed, row) in enumerate(zip(seeds, metric_rows)):
            writer.writerow([index, seed] + [repr(row[key]) for key in metric_keys])

    pooled = aggregate(records)
    summary = {
        "format_version": FORMAT_VERSION,
        "policy": {
            "kind": policy.kind,
            "name": policy.name,
            "static_gamma": policy.static_gamma,
            "static_cp": policy.static_cp,
            "dssd_gamma_max": policy.dssd_gamma_max,
            "dssd_rx_power_w": policy.dssd_rx_power_w,
        },
        "master_seed": master_seed,
        "rounds": len(records),
        "round_seeds": seeds,
        "round_files": round_files,
        "partial_rounds": [i for i, record in enumerate(records) if record.partial],
        "metrics_mean": pooled.mean,
        "metrics_ci95": pooled.ci95,
        "config": config.snapshot(),
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _cmd_run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    policy = _parse_policy(args.policy, config) if args.policy else policy_from_config(config)
    rounds = args.rounds if args.rounds is not None else config.sim.rounds
    if rounds < 1:
        raise ConfigError(["--rounds must be >= 1"])
    master_seed = config.sim.seed
    seeds = [round_seed(master_seed, r) for r in range(rounds)]
    records = [run(config, policy, seed=s) for s in seeds]

    outdir = Path(args.out)
    summary = _write_run_outputs(outdir, config, policy, master_seed, seeds, records)
    for index, record in enumerate(records):
        metrics = record.metrics()
        flag = " (partial)" if record.partial else ""
        print(
            f"round {index:03d} seed={seeds[index]} "
            f"throughput={metrics.avg_throughput_tps:.4f} tok/s "
            f"energy={metrics.avg_energy_j:.6f} J/step "
            f"queue_final={metrics.queue_final_j:.4f} J{flag}"
        )
    mean = summary["metrics_mean"]
    ci = summary["metrics_ci95"]
    print(
        f"{policy.name}: mean throughput {mean['avg_throughput_tps']:.4f} "
        f"+/- {ci['avg_throughput_tps']:.4f} tok/s, "
        f"mean energy {mean['avg_energy_j']:.6f} +/- {ci['avg_energy_j']:.6f} J/step"
    )
    if summary["partial_rounds"]:
        print(f"warning: trace exhausted in rounds {summary['partial_rounds']}", file=sys.stderr)
    print(f"wrote {rounds + 2} files to {outdir}")
    return EXIT_OK


def _sweep_cell(payload: dict) -> tuple[float, str, float, float, float, float]:
    """One (axis value, policy) cell; module level so worker pools can pickle it."""
    config = make_config(payload["snapshot"])
    policy = parse_policy_name(payload["policy"], config)
    seeds = payload["seeds"]
    records = [run(config, policy, seed=s) for s in seeds]
    _write_run_outputs(
        Path(payload["outdir"]), config, policy, payload["master_seed"], seeds, records
    )
    pooled = aggregate(records)
    return (
        payload["value"],
        policy.name,
        pooled.mean["avg_throughput_tps"],
        pooled.ci95["avg_throughput_tps"],
        pooled.mean["avg_energy_j"],
        pooled.ci95["avg_energy_j"],
    )


def _cmd_sweep(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    axis = args.axis or config.sweep.axis
    if not axis:
        raise ConfigError(["sweep needs an axis: pass --axis or set sweep.axis"])
    if args.values:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    else:
        values = list(config.sweep.values)
    if not values:
        raise ConfigError(["sweep needs values: pass --values or set sweep.values"])
    if args.policy:
        policy_names = [n.strip() for n in args.policy.split(",") if n.strip()]
    elif config.sweep.policies:
        policy_names = list(config.sweep.policies)
    else:
        policy_names = [policy_from_config(config).name]

    rounds = args.rounds if args.rounds is not None else config.sim.rounds
    if rounds < 1:
        raise ConfigError(["--rounds must be >= 1"])
    master_seed = config.sim.seed
    # Rounds are paired: cell (value, policy) r uses the same seed everywhere,
    # so cross-cell differences are policy/axis effects, not sampling noise.
    seeds = [round_seed(master_seed, r) for r in range(rounds)]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    cells = []
    for value in values:
        cfg_value = config.with_updates({axis: value})
        for name in policy_names:
            _parse_policy(name, cfg_value)  # validate before spawning work
            cells.append(
                {
                    "snapshot": cfg_value.snapshot(),
                    "policy": name,
                    "seeds": seeds,
                    "master_seed": master_seed,
                    "value": value,
                    "outdir": str(outdir / f"{axis}={value:g}" / name),
                }
            )

    workers = int(os.environ.get("SPECSIM_WORKERS", "1"))
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(cell) for cell in cells]

    sweep_csv = outdir / "sweep.csv"
    with open(sweep_csv, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["axis_value", "policy", "mean_throughput", "ci_throughput", "mean_energy", "ci_energy"]
        )
        for value, name, mean_t, ci_t, mean_e, ci_e in rows:
            writer.writerow([repr(value), name, repr(mean_t), repr(ci_t), repr(mean_e), repr(ci_e)])
    meta = {
        "format_version": FORMAT_VERSION,
        "axis": axis,
        "values": values,
        "policies": policy_names,
        "rounds": rounds,
        "master_seed": master_seed,
        "round_seeds": seeds,
        "config": config.snapshot(),
    }
    with open(outdir / "sweep.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for value, name, mean_t, ci_t, mean_e, ci_e in rows:
        print(
            f"{axis}={value:g} {name}: throughput {mean_t:.4f} +/- {ci_t:.4f} tok/s, "
            f"energy {mean_e:.6f} +/- {ci_e:.6f} J/step"
        )
    print(f"wrote {sweep_csv}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    profile = {k: v for k, v in _VERIFY_PROFILE.items() if k not in config.explicit}
    if profile:
        config = config.with_updates(profile)
    if config.entropy.law != GAMMA_SAMPLER:
        raise ConfigError(["verify requires generation.law = gamma-sampler"])
    policy = _parse_policy("gelato", config)
    master_seed = config.sim.seed
    instances = args.instances
    if instances < 1:
        raise ConfigError(["--instances must be >= 1"])

    print(
        f"checking bounds on {instances} instances "
        f"(K={config.sim.steps}, gamma0={config.scheduler.gamma0}, V={config.scheduler.v:g})"
    )
    violations = 0
    for index in range(instances):
        seed = instance_seed(master_seed, index)
        record = run(config, policy, seed=seed)
        oracle = offline_oracle(config, seed)
        report = theorem_check(record, oracle)
        if not report.holds:
            violations += 1
        print(f"instance {index:03d} seed={seed} {report.summary()}")
        if args.verbose:
            print(f"  oracle gamma: {list(oracle.sequence)}")
            print(f"  run budgets:  {record.budget.tolist()}")
            print(f"  run sent:     {record.sent.tolist()}")
    print(f"checked {instances} instances: {instances - violations} ok, {violations} violated")
    return EXIT_BOUND if violations else EXIT_OK


def _cmd_validate_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    print(config.describe())
    print("configuration ok")
    return EXIT_OK


def _cmd_calibrate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    if config.entropy.law != GAMMA_SAMPLER:
        raise ConfigError(["calibrate requires generation.law = gamma-sampler"])
    if args.tokens < 1:
        raise ConfigError(["--tokens must be >= 1"])
    seed = config.sim.seed
    rows = calibration_bins(
        config.entropy,
        config.accept_coeff,
        args.tokens,
        stream_generator(seed, "entropy"),
        stream_generator(seed, "accept"),
        bin_width=args.bin_width,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["entropy_bin_center", "acceptance_rate", "count"])
        for center, rate, count in rows:
            writer.writerow([repr(center), repr(rate), count])
    total = sum(count for _, _, count in rows)
    overall = sum(rate * count for _, rate, count in rows) / total
    print(f"sampled {total} tokens, overall acceptance {overall:.4f}")
    print(f"wrote {len(rows)} bins to {out}")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a key=value config file")
    sub.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    sub.add_argument("--seed", type=int, help="master seed (overrides sim.seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsim",
        description="Device-edge speculative decoding simulator with budgeted drafting",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_run = subparsers.add_parser("run", help="simulate rounds of one policy")
    _add_common(p_run)
    p_run.add_argument("--policy", help="gelato | static_sd[_G[_cpM]] | dssd")
    p_run.add_argument("--rounds", type=int, help="number of independently seeded rounds")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = subparsers.add_parser("sweep", help="sweep one config key across policies")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", help="dotted config key to sweep")
    p_sweep.add_argument("--values", help="comma-separated axis values")
    p_sweep.add_argument("--policy", help="comma-separated policy names")
    p_sweep.add_argument("--rounds", type=int, help="rounds per cell (paired seeds)")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = subparsers.add_parser(
        "verify", help="check the performance bounds against the exhaustive benchmark"
    )
    _add_common(p_verify)
    p_verify.add_argument("--instances", type=int, default=100, help="number of seeded instances")
    p_verify.add_argument(
        "--verbose", action="store_true", help="print per-instance draft-length sequences"
    )
    p_verify.set_defaults(func=_cmd_verify)

    p_val = subparsers.add_parser("validate-config", help="resolve and echo a configuration")
    _add_common(p_val)
    p_val.set_defaults(func=_cmd_validate_config)

    p_cal = subparsers.add_parser(
        "calibrate", help="export empirical acceptance-vs-entropy bins"
    )
    _add_common(p_cal)
    p_cal.add_argument("--tokens", type=int, default=200_000, help="Monte Carlo sample size")
    p_cal.add_argument("--bin-width", type=float, default=0.1, help="entropy bin width in nats")
    p_cal.add_argument("--out", required=True, help="output CSV path")
    p_cal.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
