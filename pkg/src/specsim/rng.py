"""Named random streams with (step, position)-indexable draws.

One master seed derives three independent streams: "channel" (one power gain
per step), "entropy" (per-token entropy draws), and "accept" (per-token
acceptance uniforms). Entropy and acceptance draws are materialized as
(steps x gamma0) tables up front, so the value consumed at a given step and
token position is a pure function of the master seed. Every policy, and the
exhaustive offline search, therefore sees identical randomness at identical
indices: common random numbers by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .generation import GAMMA_SAMPLER, EntropyModel, TokenSource, load_trace

_STREAM_IDS = {"channel": 11, "entropy": 23, "accept": 37}


def stream_generator(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named stream of a master seed."""
    if name not in _STREAM_IDS:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(_STREAM_IDS)}")
    if master_seed < 0:
        raise ValueError(f"master_seed must be >= 0, got {master_seed!r}")
    return np.random.default_rng(np.random.SeedSequence([master_seed, _STREAM_IDS[name]]))


def derive_seed(master_seed: int, *tags: int) -> int:
    """Stable child seed for (master, tags); used for round and instance seeds."""
    if master_seed < 0:
        raise ValueError(f"master_seed must be >= 0, got {master_seed!r}")
    seq = np.random.SeedSequence([master_seed, 101, *[int(t) for t in tags]])
    return int(seq.generate_state(1, dtype=np.uint64)[0] % (2**63))


@dataclass
class RunDraws:
    """All randomness for one run, pre-drawn and indexed by (step, position)."""

    seed: int
    gains: np.ndarray  # (steps,)
    source: TokenSource

    @property
    def steps(self) -> int:
        return len(self.gains)

    def gain(self, step_index: int) -> float:
        return float(self.gains[step_index])


def generate_draws(config: SimConfig, seed: int, model: EntropyModel | None = None) -> RunDraws:
    """Pre-draw one run's gains and token tables for the config's horizon.

    The entropy table width is scheduler.gamma0 regardless of policy, so each
    policy reads a prefix of the same per-step token row.
    """
    steps = config.sim.steps
    width = config.scheduler.gamma0
    model = model or config.entropy

    channel_rng = stream_generator(seed, "channel")
    gains = config.channel.mean_gain * channel_rng.standard_exponential(steps)

    accept_rng = stream_generator(seed, "accept")
    accept_table = accept_rng.random((steps, width))

    if model.law == GAMMA_SAMPLER:
        entropy_rng = stream_generator(seed, "entropy")
        entropy_table = entropy_rng.gamma(model.gamma_shape, model.gamma_scale, size=(steps, width))
        source = TokenSource(model, entropy_table, accept_table)
    else:
        trace_h, trace_s = load_trace(model.trace_path)
        source = TokenSource(
            model, None, accept_table, trace_entropies=trace_h, trace_sizes=trace_s
        )
    return RunDraws(seed=seed, gains=gains, source=source)
