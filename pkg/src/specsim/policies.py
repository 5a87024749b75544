"""Step policies: the adaptive dual-loop scheduler and the two fixed baselines.

All policies share one step skeleton: observe the step's channel, draft a
block on the device, ship a payload uplink, and charge a fixed edge
verification latency. They differ in how the block length is chosen and in
what goes over the air:

* gelato: drift-plus-penalty budget selection, then an entropy leaky-bucket
  early exit while drafting; ships the top-p set for every sent token.
* static_sd: fixed block length and a coverage multiplier on set sizes.
* dssd: fixed block length, ships token indices only, and on a verification
  mismatch receives the corrected token's distribution on the downlink.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

from .channel import payload_bits, uplink_cost
from .compute import draft_energy, draft_latency
from .config import SimConfig
from .early_exit import UncertaintyBucket, drafting_loop
from .generation import DraftToken, verify
from .scheduler import BudgetState, choose_budget, surrogate_energy

GELATO = "gelato"
STATIC_SD = "static_sd"
DSSD = "dssd"


@dataclass(frozen=True, slots=True)
class Policy:
    """Resolved policy descriptor; `name` is the label used in logs and sweeps."""

    kind: str
    name: str
    static_gamma: int = 5
    static_cp: float = 1.0
    dssd_gamma_max: int = 7
    dssd_rx_power_w: float = 0.0794328234724281


def policy_from_config(config: SimConfig) -> Policy:
    p = config.policy
    return Policy(
        kind=p.kind,
        name=_default_name(p.kind, p.static_gamma, p.static_cp),
        static_gamma=p.static_gamma,
        static_cp=p.static_cp,
        dssd_gamma_max=p.dssd_gamma_max,
        dssd_rx_power_w=p.dssd_rx_power_w,
    )


def _default_name(kind: str, static_gamma: int, static_cp: float) -> str:
    if kind != STATIC_SD:
        return kind
    name = f"static_sd_{static_gamma}"
    if static_cp != 1.0:
        name += f"_cp{static_cp:g}"
    return name


def parse_policy_name(name: str, config: SimConfig) -> Policy:
    """Resolve a CLI policy name against the config's policy block.

    Accepted forms: "gelato", "dssd", "static_sd" (config-supplied length and
    coverage), "static_sd_<gamma>", and "static_sd_<gamma>_cp<mult>".
    """
    name = name.strip()
    if name == GELATO or name == DSSD:
        base = policy_from_config(config)
        return Policy(
            kind=name,
            name=name,
            static_gamma=base.static_gamma,
            static_cp=base.static_cp,
            dssd_gamma_max=base.dssd_gamma_max,
            dssd_rx_power_w=base.dssd_rx_power_w,
        )
    if name == STATIC_SD or name.startswith("static_sd_"):
        gamma = config.policy.static_gamma
        cp = config.policy.static_cp
        if name != STATIC_SD:
            parts = name[len("static_sd_"):].split("_")
            try:
                gamma = int(parts[0])
                if len(parts) > 1:
                    if not parts[1].startswith("cp"):
                        raise ValueError
                    cp = float(parts[1][2:])
                if len(parts) > 2:
                    raise ValueError
            except (ValueError, IndexError):
                raise ValueError(f"unparseable static_sd policy name: {name!r}") from None
        if not 1 <= gamma <= config.scheduler.gamma0:
            raise ValueError(
                f"static_sd draft length {gamma} outside 1..{config.scheduler.gamma0}"
            )
        if not cp > 0.0:
            raise ValueError(f"static_sd coverage multiplier must be positive, got {cp!r}")
        base = policy_from_config(config)
        return Policy(
            kind=STATIC_SD,
            name=_default_name(STATIC_SD, gamma, cp),
            static_gamma=gamma,
            static_cp=cp,
            dssd_gamma_max=base.dssd_gamma_max,
            dssd_rx_power_w=base.dssd_rx_power_w,
        )
    raise ValueError(f"unknown policy name: {name!r}")


@dataclass(slots=True)
class StepContext:
    """Per-step inputs a policy sees, assembled by the run loop."""

    config: SimConfig
    step: int  # 1-based
    gain: float
    rate_bps: float
    context_len: float
    queue_j: float
    payload_est_bits: float
    rho: float
    draw: Callable[[int, float], DraftToken]  # (position, size_scale) -> token


@dataclass(frozen=True, slots=True)
class StepResult:
    """Realized outcome of one step, before queue and estimator updates."""

    budget: int
    sent: int
    accepted: int
    hits: int
    uplink_bits: int
    latency_s: float
    energy_j: float
    t_draft_s: float
    t_uplink_s: float
    t_verify_s: float
    t_downlink_s: float
    e_draft_j: float
    e_uplink_j: float
    e_downlink_j: float
    surrogate_energy_j: float


def gelato_step(policy: Policy, ctx: StepContext) -> StepResult:
    cfg = ctx.config
    state = BudgetState(
        queue_j=ctx.queue_j,
        rate_bps=ctx.rate_bps,
        context_len=ctx.context_len,
        payload_bits_per_token=ctx.payload_est_bits,
        rho=ctx.rho,
        slm=cfg.slm,
        verify_latency_s=cfg.verifier.verify_latency_s,
        tx_power_w=cfg.channel.tx_power_w,
        v=cfg.scheduler.v,
        gamma0=cfg.scheduler.gamma0,
    )
    budget = choose_budget(state)
    e_hat = surrogate_energy(budget, state)
    if cfg.early_exit.enabled:
        bucket = UncertaintyBucket(
            fill_nats=0.0, drain_nats=cfg.early_exit.h_th, cap_nats=cfg.early_exit.cap_nats
        )
        tokens, sent = drafting_loop(budget, lambda i: ctx.draw(i, 1.0), bucket)
    else:
        tokens = [ctx.draw(i, 1.0) for i in range(budget)]
        sent = budget
    return _finish_shared(ctx, budget, tokens, sent, e_hat)


def static_sd_step(policy: Policy, ctx: StepContext) -> StepResult:
    gamma = policy.static_gamma
    tokens = [ctx.draw(i, policy.static_cp) for i in range(gamma)]
    return _finish_shared(ctx, gamma, tokens, gamma, surrogate=float("nan"))


def _finish_shared(
    ctx: StepContext,
    budget: int,
    tokens: list[DraftToken],
    sent: int,
    surrogate: float,
) -> StepResult:
    """Common tail for policies that ship full top-p sets uplink."""
    cfg = ctx.config
    bits = payload_bits([t.topp_size for t in tokens], cfg.payload)
    t_up, e_up = uplink_cost(bits, ctx.rate_bps, cfg.channel.tx_power_w)
    t_draft = draft_latency(cfg.slm, ctx.context_len, sent)
    e_draft = draft_energy(cfg.slm, t_draft)
    result = verify(tokens, cfg.accept_coeff)
    t_verify = cfg.verifier.verify_latency_s
    return StepResult(
        budget=budget,
        sent=sent,
        accepted=result.accepted_prefix,
        hits=result.total_appended,
        uplink_bits=bits,
        latency_s=t_draft + t_up + t_verify,
        energy_j=e_draft + e_up,
        t_draft_s=t_draft,
        t_uplink_s=t_up,
        t_verify_s=t_verify,
        t_downlink_s=0.0,
        e_draft_j=e_draft,
        e_uplink_j=e_up,
        e_downlink_j=0.0,
        surrogate_energy_j=surrogate,
    )


def dssd_step(policy: Policy, ctx: StepContext) -> StepResult:
    """Index-only uplink; a mismatch pulls the corrected distribution downlink.

    The device drafts a fixed block and uplinks one token index per draft.
    When verification rejects a token, the edge returns the distribution at the
    mismatch position (modeled by that token's top-p set) at the step's channel
    rate; the device pays receive power for the downlink time. Full acceptance
    needs no downlink.
    """
    cfg = ctx.config
    gamma = policy.dssd_gamma_max
    tokens = [ctx.draw(i, 1.0) for i in range(gamma)]
    bits = gamma * cfg.payload.bits_index
    t_up, e_up = uplink_cost(bits, ctx.rate_bps, cfg.channel.tx_power_w)
    t_draft = draft_latency(cfg.slm, ctx.context_len, gamma)
    e_draft = draft_energy(cfg.slm, t_draft)
    result = verify(tokens, cfg.accept_coeff)
    t_verify = cfg.verifier.verify_latency_s
    t_down = 0.0
    e_down = 0.0
    if result.accepted_prefix < gamma:
        mismatch = tokens[result.accepted_prefix]
        down_bits = mismatch.topp_size * cfg.payload.bits_per_element
        t_down = down_bits / ctx.rate_bps
        e_down = policy.dssd_rx_power_w * t_down
    return StepResult(
        budget=gamma,
        sent=gamma,
        accepted=result.accepted_prefix,
        hits=result.total_appended,
        uplink_bits=bits,
        latency_s=t_draft + t_up + t_verify + t_down,
        energy_j=e_draft + e_up + e_down,
        t_draft_s=t_draft,
        t_uplink_s=t_up,
        t_verify_s=t_verify,
        t_downlink_s=t_down,
        e_draft_j=e_draft,
        e_uplink_j=e_up,
        e_downlink_j=e_down,
        surrogate_energy_j=float("nan"),
    )


_DISPATCH = {GELATO: gelato_step, STATIC_SD: static_sd_step, DSSD: dssd_step}


def policy_step(policy: Policy, ctx: StepContext) -> StepResult:
    """Run one step under the named policy kind."""
    try:
        fn = _DISPATCH[policy.kind]
    except KeyError:
        raise ValueError(f"unknown policy kind: {policy.kind!r}") from None
    return fn(policy, ctx)
