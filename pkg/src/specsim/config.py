"""Run configuration: dotted-key text files resolved into validated dataclasses.

A config file is a flat list of `group.key = value` lines. Every key has a
default, so an empty file is a complete configuration. Engineering units
(dBm power keys) are converted to SI at load time; all downstream code sees
watts, hertz, seconds, joules, bits. Derived quantities (the early-exit drain
threshold, the entropy-sampler scale calibrated to it, the initial payload
estimate) are resolved here once and echoed by validate-config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .channel import ChannelConfig, PayloadSpec
from .compute import SlmProfile, VerifierProfile
from .generation import GAMMA_SAMPLER, TRACE_REPLAY, EntropyModel, phi_inverse


class ConfigError(ValueError):
    """Configuration rejected; `errors` lists one message per offending key."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


# kind: int | float | bool | str | floatlist | strlist
_REGISTRY: dict[str, tuple[str, object]] = {
    "channel.bandwidth_hz": ("float", 1.0e6),
    "channel.tx_power_dbm": ("float", 23.0),
    "channel.tx_power_w": ("float", None),
    "channel.noise_psd_dbm_hz": ("float", -174.0),
    "channel.noise_psd_w_hz": ("float", None),
    # Default mean gain puts the uplink in the power-limited regime (mean SNR
    # ~ -25 dB at 1 MHz), making the link the binding resource at megahertz
    # bandwidths; adaptive drafting then separates from fixed-length drafting.
    "channel.mean_gain": ("float", 6.0e-17),
    "payload.bits_prob": ("int", 16),
    "payload.bits_index": ("int", 18),
    "compute.layers": ("int", 24),
    "compute.hidden_dim": ("int", 896),
    "compute.ffn_dim": ("int", 4864),
    "compute.device_flops": ("float", 40.0e9),
    "compute.device_power_w": ("float", 12.0),
    "compute.verify_latency_s": ("float", 0.1),
    "generation.law": ("str", GAMMA_SAMPLER),
    "generation.gamma_shape": ("float", 2.0),
    "generation.gamma_scale": ("float", None),  # default: h_th / gamma_shape
    "generation.accept_coeff": ("float", 0.35),
    "generation.cp": ("float", 1.0),
    "generation.smax": ("int", 256),
    "generation.trace_path": ("str", ""),
    "scheduler.v": ("float", 100.0),
    "scheduler.gamma0": ("int", 15),
    "scheduler.rho0": ("float", 0.9),
    "scheduler.ewma_factor": ("float", 0.9),
    "scheduler.energy_budget_j": ("float", 1.2),
    "scheduler.payload_init_bits": ("float", None),  # default: cp*exp(mean H)*element bits
    "scheduler.online_rho": ("bool", False),
    "early_exit.enabled": ("bool", True),
    "early_exit.h_th": ("float", None),  # default: -ln(rho0)/accept_coeff
    "early_exit.cap_multiplier": ("float", 1.2),
    "policy.kind": ("str", "gelato"),
    "policy.static_gamma": ("int", 5),
    "policy.static_cp": ("float", 1.0),
    "policy.dssd_gamma_max": ("int", 7),
    "policy.dssd_rx_power_dbm": ("float", 19.0),
    "policy.dssd_rx_power_w": ("float", None),
    "sim.steps": ("int", 1000),
    "sim.rounds": ("int", 1),
    "sim.seed": ("int", 12345),
    "sim.initial_context": ("int", 256),
    "sweep.axis": ("str", ""),
    "sweep.values": ("floatlist", ()),
    "sweep.policies": ("strlist", ()),
}

# (dbm key, watts key): either may be given, not both; dbm is the default form.
_DBM_PAIRS = (
    ("channel.tx_power_dbm", "channel.tx_power_w"),
    ("channel.noise_psd_dbm_hz", "channel.noise_psd_w_hz"),
    ("policy.dssd_rx_power_dbm", "policy.dssd_rx_power_w"),
)

POLICY_KINDS = ("gelato", "static_sd", "dssd")

# Numeric keys a sweep may vary.
SWEEPABLE_KINDS = ("int", "float")


@dataclass(frozen=True, slots=True)
class SchedulerConfig:
    v: float
    gamma0: int
    rho0: float
    ewma_factor: float
    energy_budget_j: float
    payload_init_bits: float
    online_rho: bool


@dataclass(frozen=True, slots=True)
class EarlyExitConfig:
    enabled: bool
    h_th: float
    cap_multiplier: float

    @property
    def cap_nats(self) -> float:
        return self.cap_multiplier * self.h_th


@dataclass(frozen=True, slots=True)
class PolicyConfig:
    kind: str
    static_gamma: int
    static_cp: float
    dssd_gamma_max: int
    dssd_rx_power_w: float


@dataclass(frozen=True, slots=True)
class SimSettings:
    steps: int
    rounds: int
    seed: int
    initial_context: int


@dataclass(frozen=True, slots=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    policies: tuple[str, ...]


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelConfig
    payload: PayloadSpec
    slm: SlmProfile
    verifier: VerifierProfile
    entropy: EntropyModel
    accept_coeff: float
    scheduler: SchedulerConfig
    early_exit: EarlyExitConfig
    policy: PolicyConfig
    sim: SimSettings
    sweep: SweepSpec
    # Resolved flat key -> value map (SI units, derived values filled in) and
    # the set of keys the user set explicitly rather than by default.
    resolved: dict = field(repr=False)
    explicit: frozenset = field(repr=False)

    @property
    def h_th(self) -> float:
        return self.early_exit.h_th

    @property
    def theta_th(self) -> float:
        return self.early_exit.cap_nats

    def snapshot(self) -> dict:
        """Flat, SI-normalized key map that rebuilds this config exactly."""
        return dict(self.resolved)

    def with_updates(self, updates: Mapping[str, object]) -> "SimConfig":
        """New config with dotted-key overrides applied on top of the resolved map.

        Derived quantities already resolved in this config stay pinned unless
        overridden, which keeps a sweep's off-axis parameters frozen.
        """
        merged = dict(self.resolved)
        for key, value in updates.items():
            merged[key] = value
        return build_config(merged, explicit=self.explicit | set(updates))

    def describe(self) -> str:
        lines = [f"{key} = {_format_value(self.resolved[key])}" for key in sorted(self.resolved)]
        lines.append(f"derived: h_th = {self.h_th!r} nats")
        lines.append(f"derived: theta_th = {self.theta_th!r} nats")
        return "\n".join(lines)


def _format_value(value: object) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    return str(value)


def _coerce(key: str, kind: str, value: object, errors: list[str]):
    try:
        if kind == "int":
            if isinstance(value, bool):
                raise ValueError("expected integer")
            if isinstance(value, int):
                return value
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError("expected integer")
                return int(value)
            text = str(value).strip()
            try:
                return int(text)
            except ValueError:
                number = float(text)
                if not number.is_integer():
                    raise ValueError("expected integer") from None
                return int(number)
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError("expected number")
            if isinstance(value, (int, float)):
                return float(value)
            return float(str(value).strip())
        if kind == "bool":
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text == "true":
                return True
            if text == "false":
                return False
            raise ValueError("expected true or false")
        if kind == "str":
            text = str(value).strip()
            if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
                text = text[1:-1]
            return text
        if kind == "floatlist":
            if isinstance(value, (tuple, list)):
                return tuple(float(v) for v in value)
            text = str(value).strip()
            if not text:
                return ()
            return tuple(float(part.strip()) for part in text.split(","))
        if kind == "strlist":
            if isinstance(value, (tuple, list)):
                return tuple(str(v) for v in value)
            text = str(value).strip()
            if not text:
                return ()
            return tuple(part.strip() for part in text.split(",") if part.strip())
    except ValueError as exc:
        errors.append(f"{key}: {exc} (got {value!r})")
        return None
    raise AssertionError(f"unhandled kind {kind}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse `key = value` lines into a raw override map (values as strings)."""
    overrides: dict[str, str] = {}
    errors: list[str] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source} line {lineno}: expected 'key = value', got {raw_line!r}")
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            errors.append(f"{source} line {lineno}: empty key")
            continue
        if key in overrides:
            errors.append(f"{source} line {lineno}: duplicate key {key}")
            continue
        overrides[key] = value.strip()
    if errors:
        raise ConfigError(errors)
    return overrides


def load_config(path: str | Path, extra: Mapping[str, object] | None = None) -> SimConfig:
    """Load and validate a config file; `extra` keys override file keys."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    overrides = parse_config_text(path.read_text(), source=str(path))
    explicit = set(overrides)
    if extra:
        overrides.update(extra)
        explicit |= set(extra)
    return build_config(overrides, explicit=explicit)


def make_config(overrides: Mapping[str, object] | None = None) -> SimConfig:
    """Defaults plus optional dotted-key overrides; the test-suite entry point."""
    overrides = dict(overrides or {})
    return build_config(overrides, explicit=set(overrides))


def build_config(overrides: Mapping[str, object], explicit: set[str] | frozenset | None = None) -> SimConfig:
    errors: list[str] = []
    unknown = [key for key in overrides if key not in _REGISTRY]
    for key in sorted(unknown):
        errors.append(f"unknown config key: {key}")
    if errors:
        raise ConfigError(errors)

    values: dict[str, object] = {}
    for key, (kind, default) in _REGISTRY.items():
        if key in overrides:
            values[key] = _coerce(key, kind, overrides[key], errors)
        else:
            values[key] = default
    if errors:
        raise ConfigError(errors)

    # dBm alternates: at most one form per pair; fold into the watts key.
    for dbm_key, watts_key in _DBM_PAIRS:
        dbm_given = dbm_key in overrides
        watts_given = watts_key in overrides
        if dbm_given and watts_given:
            errors.append(f"{dbm_key} and {watts_key} are alternates; set only one")
            continue
        if not watts_given:
            values[watts_key] = dbm_to_watts(float(values[dbm_key]))
        del values[dbm_key]
    if errors:
        raise ConfigError(errors)

    # Derived defaults, in dependency order.
    rho0 = float(values["scheduler.rho0"])
    accept_coeff = float(values["generation.accept_coeff"])
    if values["early_exit.h_th"] is None:
        if 0.0 < rho0 < 1.0 and accept_coeff > 0.0:
            values["early_exit.h_th"] = phi_inverse(rho0, accept_coeff)
        else:
            values["early_exit.h_th"] = float("nan")
    if values["generation.gamma_scale"] is None:
        shape = float(values["generation.gamma_shape"])
        h_th = float(values["early_exit.h_th"])
        values["generation.gamma_scale"] = h_th / shape if shape > 0.0 else float("nan")
    if values["scheduler.payload_init_bits"] is None:
        mean_h = float(values["generation.gamma_shape"]) * float(values["generation.gamma_scale"])
        element_bits = int(values["payload.bits_prob"]) + int(values["payload.bits_index"])
        values["scheduler.payload_init_bits"] = float(values["generation.cp"]) * math.exp(mean_h) * element_bits

    _check_ranges(values, errors)
    if errors:
        raise ConfigError(errors)

    channel = ChannelConfig(
        bandwidth_hz=float(values["channel.bandwidth_hz"]),
        tx_power_w=float(values["channel.tx_power_w"]),
        noise_psd_w_hz=float(values["channel.noise_psd_w_hz"]),
        mean_gain=float(values["channel.mean_gain"]),
    )
    payload = PayloadSpec(
        bits_prob=int(values["payload.bits_prob"]),
        bits_index=int(values["payload.bits_index"]),
    )
    slm = SlmProfile(
        layers=int(values["compute.layers"]),
        hidden_dim=int(values["compute.hidden_dim"]),
        ffn_dim=int(values["compute.ffn_dim"]),
        device_flops=float(values["compute.device_flops"]),
        device_power_w=float(values["compute.device_power_w"]),
    )
    verifier = VerifierProfile(verify_latency_s=float(values["compute.verify_latency_s"]))
    entropy = EntropyModel(
        law=str(values["generation.law"]),
        gamma_shape=float(values["generation.gamma_shape"]),
        gamma_scale=float(values["generation.gamma_scale"]),
        cp=float(values["generation.cp"]),
        smax=int(values["generation.smax"]),
        trace_path=str(values["generation.trace_path"]),
    )
    scheduler = SchedulerConfig(
        v=float(values["scheduler.v"]),
        gamma0=int(values["scheduler.gamma0"]),
        rho0=rho0,
        ewma_factor=float(values["scheduler.ewma_factor"]),
        energy_budget_j=float(values["scheduler.energy_budget_j"]),
        payload_init_bits=float(values["scheduler.payload_init_bits"]),
        online_rho=bool(values["scheduler.online_rho"]),
    )
    early_exit = EarlyExitConfig(
        enabled=bool(values["early_exit.enabled"]),
        h_th=float(values["early_exit.h_th"]),
        cap_multiplier=float(values["early_exit.cap_multiplier"]),
    )
    policy = PolicyConfig(
        kind=str(values["policy.kind"]),
        static_gamma=int(values["policy.static_gamma"]),
        static_cp=float(values["policy.static_cp"]),
        dssd_gamma_max=int(values["policy.dssd_gamma_max"]),
        dssd_rx_power_w=float(values["policy.dssd_rx_power_w"]),
    )
    sim = SimSettings(
        steps=int(values["sim.steps"]),
        rounds=int(values["sim.rounds"]),
        seed=int(values["sim.seed"]),
        initial_context=int(values["sim.initial_context"]),
    )
    sweep = SweepSpec(
        axis=str(values["sweep.axis"]),
        values=tuple(values["sweep.values"]),
        policies=tuple(values["sweep.policies"]),
    )
    return SimConfig(
        channel=channel,
        payload=payload,
        slm=slm,
        verifier=verifier,
        entropy=entropy,
        accept_coeff=accept_coeff,
        scheduler=scheduler,
        early_exit=early_exit,
        policy=policy,
        sim=sim,
        sweep=sweep,
        resolved=values,
        explicit=frozenset(explicit or ()),
    )


def _check_ranges(values: dict, errors: list[str]) -> None:
    def positive(key: str) -> None:
        v = values[key]
        if not (isinstance(v, (int, float)) and math.isfinite(float(v)) and float(v) > 0.0):
            errors.append(f"{key}: must be finite and > 0, got {v!r}")

    def at_least(key: str, bound: int) -> None:
        if int(values[key]) < bound:
            errors.append(f"{key}: must be >= {bound}, got {values[key]!r}")

    for key in (
        "channel.bandwidth_hz",
        "channel.tx_power_w",
        "channel.noise_psd_w_hz",
        "channel.mean_gain",
        "compute.device_flops",
        "compute.device_power_w",
        "generation.gamma_shape",
        "generation.gamma_scale",
        "generation.accept_coeff",
        "generation.cp",
        "scheduler.v",
        "scheduler.energy_budget_j",
        "scheduler.payload_init_bits",
        "early_exit.h_th",
        "early_exit.cap_multiplier",
        "policy.static_cp",
        "policy.dssd_rx_power_w",
    ):
        positive(key)
    if float(values["compute.verify_latency_s"]) < 0.0:
        errors.append(
            f"compute.verify_latency_s: must be >= 0, got {values['compute.verify_latency_s']!r}"
        )
    for key, bound in (
        ("payload.bits_prob", 1),
        ("payload.bits_index", 1),
        ("compute.layers", 1),
        ("compute.hidden_dim", 1),
        ("compute.ffn_dim", 1),
        ("generation.smax", 1),
        ("scheduler.gamma0", 1),
        ("policy.static_gamma", 1),
        ("policy.dssd_gamma_max", 1),
        ("sim.steps", 1),
        ("sim.rounds", 1),
        ("sim.seed", 0),
        ("sim.initial_context", 0),
    ):
        at_least(key, bound)

    law = values["generation.law"]
    if law not in (GAMMA_SAMPLER, TRACE_REPLAY):
        errors.append(
            f"generation.law: must be one of {GAMMA_SAMPLER!r}, {TRACE_REPLAY!r}, got {law!r}"
        )
    if law == TRACE_REPLAY and not str(values["generation.trace_path"]):
        errors.append("generation.trace_path: required when generation.law = trace-replay")

    rho0 = float(values["scheduler.rho0"])
    if not 0.0 < rho0 < 1.0:
        errors.append(f"scheduler.rho0: must lie in (0, 1), got {rho0!r}")
    ewma = float(values["scheduler.ewma_factor"])
    if not 0.0 <= ewma < 1.0:
        errors.append(f"scheduler.ewma_factor: must lie in [0, 1), got {ewma!r}")

    kind = values["policy.kind"]
    if kind not in POLICY_KINDS:
        errors.append(f"policy.kind: must be one of {', '.join(POLICY_KINDS)}, got {kind!r}")
    # The draft-length cap only binds the policy actually selected here;
    # policies named on the command line are validated when parsed.
    gamma0 = int(values["scheduler.gamma0"])
    if kind == "static_sd" and int(values["policy.static_gamma"]) > gamma0:
        errors.append(
            f"policy.static_gamma: must be <= scheduler.gamma0 ({gamma0}), "
            f"got {values['policy.static_gamma']!r}"
        )
    if kind == "dssd" and int(values["policy.dssd_gamma_max"]) > gamma0:
        errors.append(
            f"policy.dssd_gamma_max: must be <= scheduler.gamma0 ({gamma0}), "
            f"got {values['policy.dssd_gamma_max']!r}"
        )

    axis = str(values["sweep.axis"])
    if axis:
        if axis not in _REGISTRY:
            errors.append(f"sweep.axis: unknown config key {axis!r}")
        elif _REGISTRY[axis][0] not in SWEEPABLE_KINDS:
            errors.append(f"sweep.axis: key {axis!r} is not numeric")
    for v in values["sweep.values"]:
        if not math.isfinite(float(v)):
            errors.append(f"sweep.values: values must be finite, got {v!r}")
