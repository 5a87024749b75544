"""Closed-form drafting cost model for the on-device draft LM.

Drafting cost follows a per-layer FLOP count for decoding `draft_len` tokens
on top of `context_len` committed tokens, with attention cost charged against
the running context. Latency and energy derive from the device's sustained
FLOP rate and power draw. Edge-side verification is modeled as a fixed
latency, not a device cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class SlmProfile:
    """Architecture and device constants for the on-device draft model.

    Attributes:
        layers: Transformer layer count.
        hidden_dim: Model (residual) width.
        ffn_dim: Feed-forward inner width.
        device_flops: Sustained device throughput in FLOP/s.
        device_power_w: Device power draw while drafting, in watts.
    """

    layers: int
    hidden_dim: int
    ffn_dim: int
    device_flops: float
    device_power_w: float

    def __post_init__(self) -> None:
        for name in ("layers", "hidden_dim", "ffn_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"SlmProfile.{name} must be a positive integer, got {value!r}")
        for name in ("device_flops", "device_power_w"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"SlmProfile.{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True, slots=True)
class VerifierProfile:
    """Edge verifier timing: one parallel verification pass per step."""

    verify_latency_s: float

    def __post_init__(self) -> None:
        value = float(self.verify_latency_s)
        if not math.isfinite(value) or value < 0.0:
            raise ValueError(
                f"VerifierProfile.verify_latency_s must be finite and >= 0, got {value!r}"
            )


def draft_flops(profile: SlmProfile, context_len: float, draft_len: int) -> float:
    """Total FLOPs to draft `draft_len` tokens after `context_len` context tokens.

    Per token: 6*d_m^2 for attention projections, 4*(L + gamma/2)*d_m for
    attention over the growing context (gamma/2 is the average drafted-prefix
    length), 2*d_m^2 for the output projection, and 4*d_m*d_f for the FFN,
    all multiplied by the layer count.
    """
    if draft_len < 1 or int(draft_len) != draft_len:
        raise ValueError(f"draft_len must be an integer >= 1, got {draft_len!r}")
    if context_len < 0:
        raise ValueError(f"context_len must be >= 0, got {context_len!r}")
    d_m = profile.hidden_dim
    d_f = profile.ffn_dim
    per_token = (
        6.0 * d_m * d_m
        + 4.0 * (context_len + draft_len / 2.0) * d_m
        + 2.0 * d_m * d_m
        + 4.0 * d_m * d_f
    )
    return profile.layers * draft_len * per_token


def draft_latency(profile: SlmProfile, context_len: float, draft_len: int) -> float:
    """Wall-clock drafting time in seconds: FLOPs over sustained FLOP rate."""
    if profile.device_flops <= 0.0:
        raise ValueError("device_flops must be positive")
    return draft_flops(profile, context_len, draft_len) / profile.device_flops


def draft_energy(profile: SlmProfile, latency_s: float) -> float:
    """Device energy in joules for a drafting interval."""
    if latency_s < 0.0:
        raise ValueError(f"latency_s must be >= 0, got {latency_s!r}")
    return profile.device_power_w * latency_s
