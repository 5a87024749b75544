"""Inner-loop early exit: a leaky bucket over per-token entropy.

While drafting, each token's entropy pours into a bucket that drains by a
fixed threshold per token. A bucket overflow signals accumulated uncertainty:
drafting stops immediately, the overflow-triggering token is still
transmitted, and the step proceeds to verification with the shortened block.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

from .generation import DraftToken


@dataclass(frozen=True, slots=True)
class UncertaintyBucket:
    """Leaky-bucket state: current fill, per-token drain, and overflow cap."""

    fill_nats: float
    drain_nats: float
    cap_nats: float

    def __post_init__(self) -> None:
        if self.fill_nats < 0.0:
            raise ValueError(f"fill_nats must be >= 0, got {self.fill_nats!r}")
        if not self.drain_nats > 0.0:
            raise ValueError(f"drain_nats must be positive, got {self.drain_nats!r}")
        if not self.cap_nats > 0.0:
            raise ValueError(f"cap_nats must be positive, got {self.cap_nats!r}")


def default_cap(drain_nats: float, multiplier: float = 1.2) -> float:
    """Overflow cap as a multiple of the drain threshold."""
    if not drain_nats > 0.0:
        raise ValueError(f"drain_nats must be positive, got {drain_nats!r}")
    if not multiplier > 0.0:
        raise ValueError(f"multiplier must be positive, got {multiplier!r}")
    return multiplier * drain_nats


def bucket_step(bucket: UncertaintyBucket, entropy_nats: float) -> UncertaintyBucket:
    """One token's bucket update: fill' = max(0, fill + H - drain)."""
    if entropy_nats < 0.0:
        raise ValueError(f"entropy must be >= 0, got {entropy_nats!r}")
    fill = max(0.0, bucket.fill_nats + entropy_nats - bucket.drain_nats)
    return UncertaintyBucket(
        fill_nats=fill, drain_nats=bucket.drain_nats, cap_nats=bucket.cap_nats
    )


def drafting_loop(
    budget: int,
    draw: Callable[[int], DraftToken],
    bucket: UncertaintyBucket,
) -> tuple[list[DraftToken], int]:
    """Draft up to `budget` tokens, stopping after the first bucket overflow.

    Args:
        budget: Scheduler-chosen maximum block length, >= 1.
        draw: Token supplier for 0-based positions within this step.
        bucket: Initial bucket state (normally empty at the top of a step).

    Returns:
        (tokens, sent): the drafted block and its length. The token whose
        entropy overflows the bucket is the last one drafted and is included,
        so 1 <= sent <= budget and a block with every entropy at or below the
        drain threshold always reaches the full budget.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget!r}")
    tokens: list[DraftToken] = []
    fill = bucket.fill_nats
    for position in range(budget):
        token = draw(position)
        tokens.append(token)
        if token.entropy_nats < 0.0:
            raise ValueError(f"entropy must be >= 0, got {token.entropy_nats!r}")
        fill = max(0.0, fill + token.entropy_nats - bucket.drain_nats)
        if fill > bucket.cap_nats:
            break
    return tokens, len(tokens)
