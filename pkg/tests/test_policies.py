"""Tests for the three step policies and policy-name resolution."""

import math

import numpy as np
import pytest

from specsim.channel import payload_bits, shannon_rate, uplink_cost
from specsim.compute import draft_energy, draft_latency
from specsim.config import make_config
from specsim.generation import DraftToken
from specsim.policies import (
    DSSD,
    GELATO,
    STATIC_SD,
    Policy,
    StepContext,
    dssd_step,
    gelato_step,
    parse_policy_name,
    policy_from_config,
    policy_step,
    static_sd_step,
)
from specsim.rng import generate_draws


def make_ctx(config, tokens, gain=None, queue_j=0.0, context_len=100.0, step=1):
    gain = config.channel.mean_gain if gain is None else gain
    rate = shannon_rate(config.channel, gain)

    def draw(position, size_scale):
        token = tokens[position]
        if size_scale != 1.0:
            size = max(
                1, min(config.entropy.smax, math.ceil(token.topp_size * size_scale))
            )
            return DraftToken(token.entropy_nats, size, token.accept_draw)
        return token

    return StepContext(
        config=config,
        step=step,
        gain=gain,
        rate_bps=rate,
        context_len=context_len,
        queue_j=queue_j,
        payload_est_bits=config.scheduler.payload_init_bits,
        rho=config.scheduler.rho0,
        draw=draw,
    )


def calm_tokens(n, topp_size=3):
    # Zero entropy: always accepted, never triggers the early exit.
    return [DraftToken(0.0, topp_size, 0.5) for _ in range(n)]


class TestStaticSd:
    def test_zero_entropy_block_commits_budget_plus_one(self):
        config = make_config({})
        policy = Policy(kind=STATIC_SD, name="static_sd_5", static_gamma=5)
        res = static_sd_step(policy, make_ctx(config, calm_tokens(5)))
        assert res.budget == 5
        assert res.sent == 5
        assert res.accepted == 5
        assert res.hits == 6

    def test_step_assembly_from_parts(self):
        # Recompose latency/energy from the tested primitives.
        config = make_config({})
        policy = Policy(kind=STATIC_SD, name="static_sd_5", static_gamma=5)
        ctx = make_ctx(config, calm_tokens(5, topp_size=4))
        res = static_sd_step(policy, ctx)

        bits = 5 * 4 * 34  # five sets of four elements, 34 bits each
        assert res.uplink_bits == bits
        assert payload_bits([4] * 5, config.payload) == bits
        t_up, e_up = uplink_cost(bits, ctx.rate_bps, config.channel.tx_power_w)
        t_draft = draft_latency(config.slm, 100.0, 5)
        assert res.t_uplink_s == pytest.approx(t_up, rel=1e-12)
        assert res.latency_s == pytest.approx(
            t_draft + t_up + config.verifier.verify_latency_s, rel=1e-12
        )
        assert res.energy_j == pytest.approx(
            draft_energy(config.slm, t_draft) + e_up, rel=1e-12
        )
        assert res.t_downlink_s == 0.0
        assert res.e_downlink_j == 0.0

    def test_coverage_multiplier_inflates_payload(self):
        config = make_config({})
        base = Policy(kind=STATIC_SD, name="static_sd_5", static_gamma=5, static_cp=1.0)
        wide = Policy(kind=STATIC_SD, name="static_sd_5_cp1.5", static_gamma=5, static_cp=1.5)
        tokens = calm_tokens(5, topp_size=3)
        res_base = static_sd_step(base, make_ctx(config, tokens))
        res_wide = static_sd_step(wide, make_ctx(config, tokens))
        # ceil(3 * 1.5) = 5 elements per token instead of 3.
        assert res_base.uplink_bits == 5 * 3 * 34
        assert res_wide.uplink_bits == 5 * 5 * 34

    def test_early_rejection_still_drafts_full_block(self):
        config = make_config({})
        policy = Policy(kind=STATIC_SD, name="static_sd_5", static_gamma=5)
        tokens = calm_tokens(5)
        tokens[1] = DraftToken(50.0, 3, 0.5)  # phi ~ 0: rejected
        res = static_sd_step(policy, make_ctx(config, tokens))
        assert res.sent == 5  # no early exit in the static baseline
        assert res.accepted == 1
        assert res.hits == 2


class TestGelato:
    def test_calm_block_fills_chosen_budget(self):
        config = make_config({})
        policy = Policy(kind=GELATO, name=GELATO)
        tokens = calm_tokens(config.scheduler.gamma0)
        res = gelato_step(policy, make_ctx(config, tokens))
        assert 1 <= res.budget <= config.scheduler.gamma0
        assert res.sent == res.budget  # zero entropy cannot overflow the bucket
        assert res.hits == res.sent + 1
        assert math.isfinite(res.surrogate_energy_j)

    def test_hot_token_stops_drafting(self):
        config = make_config({})
        policy = Policy(kind=GELATO, name=GELATO)
        tokens = calm_tokens(config.scheduler.gamma0)
        tokens[1] = DraftToken(5.0, 3, 0.5)  # overflows the bucket at position 1
        res = gelato_step(policy, make_ctx(config, tokens))
        if res.budget >= 2:
            assert res.sent == 2  # the offending token is still transmitted
            assert res.uplink_bits == payload_bits([3, 3], config.payload)

    def test_early_exit_disabled_sends_full_budget(self):
        config = make_config({"early_exit.enabled": False})
        policy = Policy(kind=GELATO, name=GELATO)
        tokens = calm_tokens(config.scheduler.gamma0)
        tokens[1] = DraftToken(5.0, 3, 0.5)
        res = gelato_step(policy, make_ctx(config, tokens))
        assert res.sent == res.budget

    def test_huge_queue_drafts_single_token(self):
        config = make_config({})
        policy = Policy(kind=GELATO, name=GELATO)
        tokens = calm_tokens(config.scheduler.gamma0)
        res = gelato_step(policy, make_ctx(config, tokens, queue_j=1e12))
        assert res.budget == 1


class TestDssd:
    def test_uplink_is_indices_only(self):
        config = make_config({})
        policy = policy_from_config(make_config({"policy.kind": "dssd"}))
        res = dssd_step(policy, make_ctx(config, calm_tokens(7)))
        # One 18-bit index per drafted token, no probability payload.
        assert res.uplink_bits == 7 * 18 == 126

    def test_full_acceptance_needs_no_downlink(self):
        config = make_config({})
        policy = policy_from_config(make_config({"policy.kind": "dssd"}))
        res = dssd_step(policy, make_ctx(config, calm_tokens(7)))
        assert res.accepted == 7
        assert res.t_downlink_s == 0.0
        assert res.e_downlink_j == 0.0

    def test_mismatch_pulls_corrected_distribution(self):
        config = make_config({})
        policy = policy_from_config(make_config({"policy.kind": "dssd"}))
        tokens = calm_tokens(7, topp_size=9)
        tokens[2] = DraftToken(50.0, 9, 0.5)  # rejected at position 2
        ctx = make_ctx(config, tokens)
        res = dssd_step(policy, ctx)
        assert res.accepted == 2
        down_bits = 9 * 34  # mismatch token's set at 34 bits per element
        assert res.t_downlink_s == pytest.approx(down_bits / ctx.rate_bps, rel=1e-12)
        assert res.e_downlink_j == pytest.approx(
            policy.dssd_rx_power_w * down_bits / ctx.rate_bps, rel=1e-12
        )
        assert res.latency_s == pytest.approx(
            res.t_draft_s + res.t_uplink_s + res.t_verify_s + res.t_downlink_s, rel=1e-12
        )
        assert res.energy_j == pytest.approx(
            res.e_draft_j + res.e_uplink_j + res.e_downlink_j, rel=1e-12
        )

    def test_receive_power_frozen_default(self):
        # 19 dBm receive power.
        policy = policy_from_config(make_config({"policy.kind": "dssd"}))
        assert policy.dssd_rx_power_w == pytest.approx(0.0794328234724281, rel=1e-12)


class TestCommonRandomNumbers:
    def test_policies_see_identical_gains_and_tokens(self):
        # The draw tables depend only on the seed, so every policy reads the
        # same gain and the same token at the same (step, position).
        config = make_config({"sim.steps": 6})
        draws_a = generate_draws(config, 42)
        draws_b = generate_draws(config, 42)
        for k in range(6):
            assert draws_a.gain(k) == draws_b.gain(k)
            for i in range(config.scheduler.gamma0):
                assert draws_a.source.token(k, i) == draws_b.source.token(k, i)

    def test_size_scale_shares_entropy_and_draw(self):
        config = make_config({"sim.steps": 2})
        draws = generate_draws(config, 42)
        plain = draws.source.token(0, 0)
        scaled = draws.source.token(0, 0, size_scale=1.5)
        assert scaled.entropy_nats == plain.entropy_nats
        assert scaled.accept_draw == plain.accept_draw
        assert scaled.topp_size >= plain.topp_size


class TestPolicyStepDispatch:
    def test_dispatches_by_kind(self):
        config = make_config({})
        tokens = calm_tokens(config.scheduler.gamma0)
        for kind, name in ((GELATO, "gelato"), (STATIC_SD, "static_sd_5"), (DSSD, "dssd")):
            policy = Policy(kind=kind, name=name)
            res = policy_step(policy, make_ctx(config, tokens))
            assert res.hits >= 1

    def test_unknown_kind_rejected(self):
        config = make_config({})
        policy = Policy(kind="greedy", name="greedy")
        with pytest.raises(ValueError, match="unknown policy kind"):
            policy_step(policy, make_ctx(config, calm_tokens(7)))


class TestParsePolicyName:
    def test_simple_names(self):
        config = make_config({})
        assert parse_policy_name("gelato", config).kind == GELATO
        assert parse_policy_name("dssd", config).kind == DSSD
        bare = parse_policy_name("static_sd", config)
        assert bare.kind == STATIC_SD
        assert bare.static_gamma == config.policy.static_gamma

    def test_parameterized_static_names(self):
        config = make_config({})
        p = parse_policy_name("static_sd_3", config)
        assert (p.static_gamma, p.static_cp, p.name) == (3, 1.0, "static_sd_3")
        p = parse_policy_name("static_sd_7_cp1.5", config)
        assert (p.static_gamma, p.static_cp, p.name) == (7, 1.5, "static_sd_7_cp1.5")

    def test_rejects_out_of_range_gamma(self):
        config = make_config({})
        with pytest.raises(ValueError, match="outside"):
            parse_policy_name(f"static_sd_{config.scheduler.gamma0 + 1}", config)
        with pytest.raises(ValueError, match="outside"):
            parse_policy_name("static_sd_0", config)

    def test_rejects_garbage(self):
        config = make_config({})
        for bad in ("turbo", "static_sd_x", "static_sd_5_xx2", "static_sd_5_cp0"):
            with pytest.raises(ValueError):
                parse_policy_name(bad, config)

    def test_default_name_includes_coverage_suffix(self):
        config = make_config({"policy.kind": "static_sd", "policy.static_cp": 1.5})
        assert policy_from_config(config).name == "static_sd_5_cp1.5"
