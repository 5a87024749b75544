"""Discrete-step run loop and cross-round aggregation.

A run advances one speculation step at a time: sample the channel, let the
policy draft and transmit a block, verify it, then settle the bookkeeping
that links steps together (virtual energy queue on realized energy, EWMA of
observed per-token payload, committed-context growth). Every step appends at
least one token, so the context trajectory is strictly increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import shannon_rate
from .config import SimConfig
from .generation import TraceExhausted
from .policies import Policy, StepContext, policy_from_config, policy_step
from .rng import RunDraws, generate_draws
from .scheduler import SchedulerParams, VirtualQueue, update_payload_estimate, update_queue

_RHO_ONLINE_MAX = 1.0 - 1e-9


@dataclass(frozen=True, slots=True)
class StepOutcome:
    """Public per-step log row."""

    step: int
    budget: int
    sent: int
    hits: int
    latency_s: float
    energy_j: float
    uplink_bits: int
    queue_after_j: float
    gain: float


@dataclass(frozen=True, slots=True)
class Metrics:
    """Per-run averages over the realized steps."""

    avg_throughput_tps: float
    avg_energy_j: float
    avg_budget: float
    avg_sent: float
    acceptance_rate: float
    queue_mean_j: float
    queue_max_j: float
    queue_final_j: float

    def as_dict(self) -> dict[str, float]:
        return {
            "avg_throughput_tps": self.avg_throughput_tps,
            "avg_energy_j": self.avg_energy_j,
            "avg_budget": self.avg_budget,
            "avg_sent": self.avg_sent,
            "acceptance_rate": self.acceptance_rate,
            "queue_mean_j": self.queue_mean_j,
            "queue_max_j": self.queue_max_j,
            "queue_final_j": self.queue_final_j,
        }


@dataclass
class RunRecord:
    """Complete log of one run: per-step arrays plus the context trajectory.

    Column arrays are aligned by step; `context` holds the committed context
    length at the start of each step plus the final length, so it has one more
    entry than there are steps.
    """

    config: SimConfig
    seed: int
    policy: Policy
    partial: bool
    step: np.ndarray
    budget: np.ndarray
    sent: np.ndarray
    accepted: np.ndarray
    hits: np.ndarray
    latency_s: np.ndarray
    energy_j: np.ndarray
    uplink_bits: np.ndarray
    queue_j: np.ndarray
    gain: np.ndarray
    context: np.ndarray
    components: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.step)

    @property
    def steps(self) -> list[StepOutcome]:
        return [
            StepOutcome(
                step=int(self.step[i]),
                budget=int(self.budget[i]),
                sent=int(self.sent[i]),
                hits=int(self.hits[i]),
                latency_s=float(self.latency_s[i]),
                energy_j=float(self.energy_j[i]),
                uplink_bits=int(self.uplink_bits[i]),
                queue_after_j=float(self.queue_j[i]),
                gain=float(self.gain[i]),
            )
            for i in range(self.n_steps)
        ]

    @property
    def throughput_tps(self) -> np.ndarray:
        return self.hits / self.latency_s

    def metrics(self) -> Metrics:
        if self.n_steps == 0:
            raise ValueError("run produced no steps")
        return Metrics(
            avg_throughput_tps=float(np.mean(self.throughput_tps)),
            avg_energy_j=float(np.mean(self.energy_j)),
            avg_budget=float(np.mean(self.budget)),
            avg_sent=float(np.mean(self.sent)),
            acceptance_rate=float(np.sum(self.accepted) / np.sum(self.sent)),
            queue_mean_j=float(np.mean(self.queue_j)),
            queue_max_j=float(np.max(self.queue_j)),
            queue_final_j=float(self.queue_j[-1]),
        )


def run(
    config: SimConfig,
    policy: Policy | None = None,
    seed: int | None = None,
    draws: RunDraws | None = None,
) -> RunRecord:
    """Simulate one seeded run of sim.steps speculation steps.

    Args:
        config: Validated configuration.
        policy: Policy to drive; defaults to the config's policy block.
        seed: Master seed; defaults to sim.seed.
        draws: Pre-generated randomness (for callers that share draws across
            policies); must match the config horizon.

    Returns:
        RunRecord with one row per completed step. A trace that runs out
        mid-step truncates the run and marks the record partial.
    """
    policy = policy or policy_from_config(config)
    seed = config.sim.seed if seed is None else seed
    if draws is None:
        draws = generate_draws(config, seed)
    n_steps = config.sim.steps
    if draws.steps != n_steps or draws.source.max_positions != config.scheduler.gamma0:
        raise ValueError("draws do not match the config horizon")

    sched = config.scheduler
    params = SchedulerParams(
        v=sched.v,
        gamma0=sched.gamma0,
        rho0=sched.rho0,
        payload_est_bits=sched.payload_init_bits,
        ewma_factor=sched.ewma_factor,
    )
    queue = VirtualQueue(backlog_j=0.0, budget_j=sched.energy_budget_j)
    rho = sched.rho0
    context_len = float(config.sim.initial_context)

    cols = {
        name: np.empty(n_steps, dtype=np.int64)
        for name in ("step", "budget", "sent", "accepted", "hits", "uplink_bits")
    }
    fcols = {
        name: np.empty(n_steps, dtype=np.float64)
        for name in ("latency_s", "energy_j", "queue_j", "gain")
    }
    comp = {
        name: np.empty(n_steps, dtype=np.float64)
        for name in (
            "t_draft_s",
            "t_uplink_s",
            "t_verify_s",
            "t_downlink_s",
            "e_draft_j",
            "e_uplink_j",
            "e_downlink_j",
            "surrogate_energy_j",
        )
    }
    context = np.empty(n_steps + 1, dtype=np.float64)

    completed = 0
    partial = False
    source = draws.source
    for k in range(1, n_steps + 1):
        idx = k - 1
        gain = draws.gain(idx)
        ctx = StepContext(
            config=config,
            step=k,
            gain=gain,
            rate_bps=shannon_rate(config.channel, gain),
            context_len=context_len,
            queue_j=queue.backlog_j,
            payload_est_bits=params.payload_est_bits,
            rho=rho,
            draw=lambda i, scale, _idx=idx: source.token(_idx, i, scale),
        )
        try:
            res = policy_step(policy, ctx)
        except TraceExhausted:
            partial = True
            break

        queue = update_queue(queue, res.energy_j)
        params.payload_est_bits = update_payload_estimate(params, res.uplink_bits / res.sent)
        if sched.online_rho:
            observed = res.accepted / res.sent
            rho = min(
                _RHO_ONLINE_MAX,
                sched.ewma_factor * rho + (1.0 - sched.ewma_factor) * observed,
            )

        cols["step"][idx] = k
        cols["budget"][idx] = res.budget
        cols["sent"][idx] = res.sent
        cols["accepted"][idx] = res.accepted
        cols["hits"][idx] = res.hits
        cols["uplink_bits"][idx] = res.uplink_bits
        fcols["latency_s"][idx] = res.latency_s
        fcols["energy_j"][idx] = res.energy_j
        fcols["queue_j"][idx] = queue.backlog_j
        fcols["gain"][idx] = gain
        comp["t_draft_s"][idx] = res.t_draft_s
        comp["t_uplink_s"][idx] = res.t_uplink_s
        comp["t_verify_s"][idx] = res.t_verify_s
        comp["t_downlink_s"][idx] = res.t_downlink_s
        comp["e_draft_j"][idx] = res.e_draft_j
        comp["e_uplink_j"][idx] = res.e_uplink_j
        comp["e_downlink_j"][idx] = res.e_downlink_j
        comp["surrogate_energy_j"][idx] = res.surrogate_energy_j
        context[idx] = context_len

        context_len += res.hits
        completed = k

    if completed == 0:
        raise ValueError("run completed no steps (trace exhausted immediately)")
    context[completed] = context_len

    trim = slice(0, completed)
    return RunRecord(
        config=config,
        seed=seed,
        policy=policy,
        partial=partial,
        step=cols["step"][trim].copy(),
        budget=cols["budget"][trim].copy(),
        sent=cols["sent"][trim].copy(),
        accepted=cols["accepted"][trim].copy(),
        hits=cols["hits"][trim].copy(),
        latency_s=fcols["latency_s"][trim].copy(),
        energy_j=fcols["energy_j"][trim].copy(),
        uplink_bits=cols["uplink_bits"][trim].copy(),
        queue_j=fcols["queue_j"][trim].copy(),
        gain=fcols["gain"][trim].copy(),
        context=context[: completed + 1].copy(),
        components={name: arr[trim].copy() for name, arr in comp.items()},
    )


@dataclass(frozen=True)
class AggregateMetrics:
    """Across-round mean and normal-theory 95% confidence half-widths."""

    n_rounds: int
    mean: dict[str, float]
    ci95: dict[str, float]


def _ci95(samples: np.ndarray) -> float:
    if len(samples) < 2:
        return 0.0
    return 1.96 * float(np.std(samples, ddof=1)) / math.sqrt(len(samples))


def aggregate(records: list[RunRecord]) -> AggregateMetrics:
    """Pool per-run metrics across rounds of the same configuration.

    Records must share a config (seeds may differ); a single record yields
    zero-width intervals.
    """
    if not records:
        raise ValueError("aggregate requires at least one record")
    reference = _comparable_snapshot(records[0].config)
    for rec in records[1:]:
        if _comparable_snapshot(rec.config) != reference:
            raise ValueError("aggregate requires records from identical configs")
    table: dict[str, list[float]] = {}
    for rec in records:
        for name, value in rec.metrics().as_dict().items():
            table.setdefault(name, []).append(value)
    mean = {name: float(np.mean(vals)) for name, vals in table.items()}
    ci = {name: _ci95(np.asarray(vals)) for name, vals in table.items()}
    return AggregateMetrics(n_rounds=len(records), mean=mean, ci95=ci)


def _comparable_snapshot(config: SimConfig) -> dict:
    snap = config.snapshot()
    snap.pop("sim.seed", None)
    return snap
