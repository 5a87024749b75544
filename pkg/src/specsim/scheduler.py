"""Outer-loop budget scheduler: drift-plus-penalty selection of the draft budget.

Each step the scheduler observes the realized channel rate and the energy
backlog queue, scores every candidate budget by V * expected_throughput -
queue * expected_energy using closed-form cost surrogates, and picks the
maximizer. The virtual queue integrates realized energy overshoot against the
long-run budget, so a persistent backlog steers the argmax toward cheaper
drafts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .compute import SlmProfile, draft_energy, draft_latency


def expected_hits(draft_len: int, rho: float) -> float:
    """Expected tokens committed per step for an i.i.d. per-token acceptance rho.

    Closed form (1 - rho^(gamma+1)) / (1 - rho): the mean accepted prefix of a
    geometric truncated at gamma, plus the verifier's corrected token. rho >= 1
    is outside the surrogate's domain and is rejected rather than substituted
    with the limit.
    """
    if draft_len < 1 or int(draft_len) != draft_len:
        raise ValueError(f"draft_len must be an integer >= 1, got {draft_len!r}")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    return (1.0 - rho ** (draft_len + 1)) / (1.0 - rho)


@dataclass(frozen=True, slots=True)
class BudgetState:
    """Everything the budget decision sees at the top of a step."""

    queue_j: float
    rate_bps: float
    context_len: float
    payload_bits_per_token: float
    rho: float
    slm: SlmProfile
    verify_latency_s: float
    tx_power_w: float
    v: float
    gamma0: int

    def __post_init__(self) -> None:
        if self.queue_j < 0.0:
            raise ValueError(f"queue_j must be >= 0, got {self.queue_j!r}")
        if not self.rate_bps > 0.0:
            raise ValueError(f"rate_bps must be positive, got {self.rate_bps!r}")
        if not self.payload_bits_per_token > 0.0:
            raise ValueError(
                f"payload_bits_per_token must be positive, got {self.payload_bits_per_token!r}"
            )
        if not self.v > 0.0:
            raise ValueError(f"v must be positive, got {self.v!r}")
        if self.gamma0 < 1:
            raise ValueError(f"gamma0 must be >= 1, got {self.gamma0!r}")


def surrogate_latency(draft_len: int, state: BudgetState) -> float:
    """Expected step latency at a candidate budget: draft + uplink + verify."""
    uplink_s = draft_len * state.payload_bits_per_token / state.rate_bps
    return (
        draft_latency(state.slm, state.context_len, draft_len)
        + uplink_s
        + state.verify_latency_s
    )


def surrogate_energy(draft_len: int, state: BudgetState) -> float:
    """Expected step energy at a candidate budget: draft + uplink radio."""
    draft_s = draft_latency(state.slm, state.context_len, draft_len)
    uplink_s = draft_len * state.payload_bits_per_token / state.rate_bps
    return draft_energy(state.slm, draft_s) + state.tx_power_w * uplink_s


def utility(draft_len: int, state: BudgetState) -> float:
    """Drift-plus-penalty score: V * expected throughput - queue * expected energy."""
    throughput = expected_hits(draft_len, state.rho) / surrogate_latency(draft_len, state)
    return state.v * throughput - state.queue_j * surrogate_energy(draft_len, state)


def choose_budget(state: BudgetState) -> int:
    """Exhaustive argmax of the utility over budgets 1..gamma0; ties pick the smaller."""
    best_gamma = 1
    best_value = -math.inf
    for gamma in range(1, state.gamma0 + 1):
        value = utility(gamma, state)
        if value > best_value:
            best_value = value
            best_gamma = gamma
    return best_gamma


@dataclass(frozen=True, slots=True)
class VirtualQueue:
    """Energy backlog in joules against a per-step budget."""

    backlog_j: float
    budget_j: float

    def __post_init__(self) -> None:
        if self.backlog_j < 0.0:
            raise ValueError(f"backlog_j must be >= 0, got {self.backlog_j!r}")
        if not self.budget_j > 0.0:
            raise ValueError(f"budget_j must be positive, got {self.budget_j!r}")


def update_queue(queue: VirtualQueue, realized_energy_j: float) -> VirtualQueue:
    """Queue recursion on realized energy: max(0, Q + E - budget)."""
    if realized_energy_j < 0.0:
        raise ValueError(f"realized_energy_j must be >= 0, got {realized_energy_j!r}")
    backlog = max(0.0, queue.backlog_j + realized_energy_j - queue.budget_j)
    return VirtualQueue(backlog_j=backlog, budget_j=queue.budget_j)


@dataclass(slots=True)
class SchedulerParams:
    """Mutable scheduler state carried across steps."""

    v: float
    gamma0: int
    rho0: float
    payload_est_bits: float
    ewma_factor: float

    def __post_init__(self) -> None:
        if not self.v > 0.0:
            raise ValueError(f"v must be positive, got {self.v!r}")
        if self.gamma0 < 1:
            raise ValueError(f"gamma0 must be >= 1, got {self.gamma0!r}")
        if not 0.0 <= self.rho0 < 1.0:
            raise ValueError(f"rho0 must lie in [0, 1), got {self.rho0!r}")
        if not 0.0 <= self.ewma_factor < 1.0:
            raise ValueError(f"ewma_factor must lie in [0, 1), got {self.ewma_factor!r}")


def update_payload_estimate(params: SchedulerParams, observed_bits_per_token: float) -> float:
    """EWMA update of the per-token payload estimate; returns the new estimate."""
    if not params.payload_est_bits > 0.0:
        raise ValueError(
            f"payload estimate must be positive before updating, got {params.payload_est_bits!r}"
        )
    if not observed_bits_per_token > 0.0:
        raise ValueError(
            f"observed_bits_per_token must be positive, got {observed_bits_per_token!r}"
        )
    f = params.ewma_factor
    return f * params.payload_est_bits + (1.0 - f) * observed_bits_per_token
