"""Uplink channel model: Rayleigh block fading, Shannon-capacity rate, payload sizing.

The power gain is redrawn once per step and held for that step's transmission.
Rate follows the AWGN capacity formula at the sampled gain; payloads count the
compressed top-p set for every transmitted draft token.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, slots=True)
class ChannelConfig:
    """Uplink constants. Powers are stored in watts, noise in W/Hz."""

    bandwidth_hz: float
    tx_power_w: float
    noise_psd_w_hz: float
    mean_gain: float

    def __post_init__(self) -> None:
        for name in ("bandwidth_hz", "tx_power_w", "noise_psd_w_hz", "mean_gain"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"ChannelConfig.{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True, slots=True)
class PayloadSpec:
    """Bit widths for one top-p set element: quantized probability plus token index."""

    bits_prob: int
    bits_index: int

    def __post_init__(self) -> None:
        for name in ("bits_prob", "bits_index"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"PayloadSpec.{name} must be a positive integer, got {value!r}")

    @property
    def bits_per_element(self) -> int:
        return self.bits_prob + self.bits_index


@dataclass(frozen=True, slots=True)
class ChannelSample:
    """One step's realized power gain and the rate it supports."""

    gain: float
    rate_bps: float


def sample_gain(cfg: ChannelConfig, rng: np.random.Generator) -> float:
    """Draw one Rayleigh power gain: mean_gain times a unit exponential."""
    return cfg.mean_gain * float(rng.standard_exponential())


def shannon_rate(cfg: ChannelConfig, gain: float) -> float:
    """Achievable uplink rate in bit/s at the sampled power gain."""
    if not gain > 0.0:
        raise ValueError(f"gain must be positive, got {gain!r}")
    snr = cfg.tx_power_w * gain / (cfg.noise_psd_w_hz * cfg.bandwidth_hz)
    return cfg.bandwidth_hz * math.log2(1.0 + snr)


def sample_channel(cfg: ChannelConfig, rng: np.random.Generator) -> ChannelSample:
    gain = sample_gain(cfg, rng)
    return ChannelSample(gain=gain, rate_bps=shannon_rate(cfg, gain))


def payload_bits(set_sizes: Iterable[int], spec: PayloadSpec) -> int:
    """Uplink payload in bits for one step's transmitted draft tokens.

    Each token contributes its top-p set size times the per-element width.
    An empty token list is a zero-bit payload.
    """
    total_elements = 0
    for size in set_sizes:
        if size < 1 or int(size) != size:
            raise ValueError(f"top-p set sizes must be integers >= 1, got {size!r}")
        total_elements += int(size)
    return total_elements * spec.bits_per_element


def uplink_cost(bits: float, rate_bps: float, tx_power_w: float) -> tuple[float, float]:
    """Transmission time and radio energy for a payload at a given rate.

    Returns:
        (time_s, energy_j) with energy = tx power * time.
    """
    if bits < 0.0:
        raise ValueError(f"bits must be >= 0, got {bits!r}")
    if not rate_bps > 0.0:
        raise ValueError(f"rate_bps must be positive, got {rate_bps!r}")
    if tx_power_w < 0.0:
        raise ValueError(f"tx_power_w must be >= 0, got {tx_power_w!r}")
    time_s = bits / rate_bps
    return time_s, tx_power_w * time_s
