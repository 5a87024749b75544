"""Tests for the run loop, per-run metrics, and cross-round aggregation."""

import math

import numpy as np
import pytest

from specsim.channel import shannon_rate
from specsim.config import make_config
from specsim.policies import Policy, StepContext, policy_from_config, policy_step
from specsim.rng import generate_draws
from specsim.scheduler import VirtualQueue, update_queue
from specsim.simulator import AggregateMetrics, Metrics, RunRecord, aggregate, run


class TestSingleStepComposition:
    def test_one_step_run_matches_hand_assembled_step(self):
        # Drive policy_step once with the exact inputs the run loop would
        # assemble for step 1, and compare every logged column.
        config = make_config({"sim.steps": 1, "sim.seed": 5})
        policy = policy_from_config(config)
        record = run(config, seed=5)

        draws = generate_draws(config, 5)
        gain = draws.gain(0)
        ctx = StepContext(
            config=config,
            step=1,
            gain=gain,
            rate_bps=shannon_rate(config.channel, gain),
            context_len=float(config.sim.initial_context),
            queue_j=0.0,
            payload_est_bits=config.scheduler.payload_init_bits,
            rho=config.scheduler.rho0,
            draw=lambda i, scale: draws.source.token(0, i, scale),
        )
        res = policy_step(policy, ctx)
        expected_queue = update_queue(
            VirtualQueue(0.0, config.scheduler.energy_budget_j), res.energy_j
        ).backlog_j

        assert record.n_steps == 1
        assert record.budget[0] == res.budget
        assert record.sent[0] == res.sent
        assert record.accepted[0] == res.accepted
        assert record.hits[0] == res.hits
        assert record.uplink_bits[0] == res.uplink_bits
        assert record.latency_s[0] == res.latency_s
        assert record.energy_j[0] == res.energy_j
        assert record.gain[0] == gain
        assert record.queue_j[0] == expected_queue
        assert record.context[0] == config.sim.initial_context
        assert record.context[1] == config.sim.initial_context + res.hits


class TestRunInvariants:
    def test_component_reconstruction(self):
        # Latency and energy must equal the sum of their logged components.
        config = make_config({"sim.steps": 50, "sim.seed": 9})
        record = run(config)
        comp = record.components
        lat = (
            comp["t_draft_s"]
            + comp["t_uplink_s"]
            + comp["t_verify_s"]
            + comp["t_downlink_s"]
        )
        en = comp["e_draft_j"] + comp["e_uplink_j"] + comp["e_downlink_j"]
        np.testing.assert_allclose(lat, record.latency_s, rtol=1e-12)
        np.testing.assert_allclose(en, record.energy_j, rtol=1e-12)

    def test_context_growth_matches_hits(self):
        config = make_config({"sim.steps": 40, "sim.seed": 3})
        record = run(config)
        assert len(record.context) == record.n_steps + 1
        diffs = np.diff(record.context)
        np.testing.assert_array_equal(diffs, record.hits.astype(float))
        assert np.all(diffs >= 1)  # every step commits at least one token

    def test_queue_recursion(self):
        config = make_config({"sim.steps": 40, "sim.seed": 3})
        record = run(config)
        budget = config.scheduler.energy_budget_j
        q = 0.0
        for i in range(record.n_steps):
            q = max(0.0, q + record.energy_j[i] - budget)
            assert record.queue_j[i] == pytest.approx(q, rel=1e-12, abs=1e-15)

    def test_bounds_per_step(self):
        config = make_config({"sim.steps": 60, "sim.seed": 17})
        record = run(config)
        g0 = config.scheduler.gamma0
        assert np.all((record.budget >= 1) & (record.budget <= g0))
        assert np.all((record.sent >= 1) & (record.sent <= record.budget))
        assert np.all((record.accepted >= 0) & (record.accepted <= record.sent))
        np.testing.assert_array_equal(record.hits, record.accepted + 1)
        assert np.all(record.latency_s > 0)
        assert np.all(record.energy_j > 0)
        assert not record.partial

    def test_same_seed_reproduces_exactly(self):
        config = make_config({"sim.steps": 30, "sim.seed": 11})
        a = run(config)
        b = run(config)
        np.testing.assert_array_equal(a.hits, b.hits)
        np.testing.assert_array_equal(a.latency_s, b.latency_s)
        np.testing.assert_array_equal(a.energy_j, b.energy_j)
        np.testing.assert_array_equal(a.queue_j, b.queue_j)

    def test_shared_draws_reuse(self):
        # Passing pre-generated draws must equal generating them internally.
        config = make_config({"sim.steps": 20, "sim.seed": 11})
        draws = generate_draws(config, 11)
        a = run(config, draws=draws)
        b = run(config)
        np.testing.assert_array_equal(a.hits, b.hits)
        np.testing.assert_array_equal(a.energy_j, b.energy_j)

    def test_mismatched_draws_rejected(self):
        config = make_config({"sim.steps": 20})
        other = make_config({"sim.steps": 21})
        draws = generate_draws(other, 1)
        with pytest.raises(ValueError, match="horizon"):
            run(config, draws=draws)


class TestMetrics:
    def test_metrics_recomputation(self):
        config = make_config({"sim.steps": 80, "sim.seed": 23})
        record = run(config)
        m = record.metrics()
        assert m.avg_throughput_tps == pytest.approx(
            float(np.mean(record.hits / record.latency_s)), rel=1e-12
        )
        assert m.avg_energy_j == pytest.approx(float(np.mean(record.energy_j)), rel=1e-12)
        assert m.avg_budget == pytest.approx(float(np.mean(record.budget)), rel=1e-12)
        assert m.avg_sent == pytest.approx(float(np.mean(record.sent)), rel=1e-12)
        assert m.acceptance_rate == pytest.approx(
            float(np.sum(record.accepted)) / float(np.sum(record.sent)), rel=1e-12
        )
        assert m.queue_final_j == record.queue_j[-1]
        assert m.queue_max_j == record.queue_j.max()
        assert set(m.as_dict()) == {
            "avg_throughput_tps",
            "avg_energy_j",
            "avg_budget",
            "avg_sent",
            "acceptance_rate",
            "queue_mean_j",
            "queue_max_j",
            "queue_final_j",
        }


class TestAggregate:
    def make_records(self, seeds, **overrides):
        config = make_config({"sim.steps": 25, **overrides})
        return [run(config, seed=s) for s in seeds]

    def test_mean_and_ci(self):
        records = self.make_records([1, 2, 3, 4])
        agg = aggregate(records)
        assert agg.n_rounds == 4
        samples = np.array([r.metrics().avg_energy_j for r in records])
        assert agg.mean["avg_energy_j"] == pytest.approx(float(samples.mean()), rel=1e-12)
        expected_ci = 1.96 * float(np.std(samples, ddof=1)) / math.sqrt(4)
        assert agg.ci95["avg_energy_j"] == pytest.approx(expected_ci, rel=1e-12)

    def test_single_record_zero_width(self):
        agg = aggregate(self.make_records([1]))
        assert agg.n_rounds == 1
        assert all(v == 0.0 for v in agg.ci95.values())

    def test_seeds_may_differ_but_config_may_not(self):
        mixed = self.make_records([1]) + self.make_records([2], **{"scheduler.v": 50.0})
        with pytest.raises(ValueError, match="identical configs"):
            aggregate(mixed)
        # Same config with different sim.seed values aggregates fine.
        config_a = make_config({"sim.steps": 25, "sim.seed": 1})
        config_b = make_config({"sim.steps": 25, "sim.seed": 2})
        agg = aggregate([run(config_a), run(config_b)])
        assert agg.n_rounds == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestTraceTruncation:
    def write_trace(self, path, rows):
        lines = ["entropy_nats,topp_size"]
        lines += [f"{h},{s}" for h, s in rows]
        path.write_text("\n".join(lines) + "\n")

    def test_short_trace_marks_partial(self, tmp_path):
        # 12 rows cannot cover 10 static_sd_5 steps; the run truncates at the
        # step that exhausts the trace and keeps the completed prefix.
        trace = tmp_path / "trace.csv"
        self.write_trace(trace, [(0.05, 2)] * 12)
        config = make_config(
            {
                "sim.steps": 10,
                "generation.law": "trace-replay",
                "generation.trace_path": str(trace),
                "policy.kind": "static_sd",
            }
        )
        record = run(config)
        assert record.partial
        assert record.n_steps == 2  # 2 * 5 = 10 rows consumed; step 3 dies
        assert len(record.context) == record.n_steps + 1

    def test_immediate_exhaustion_is_an_error(self, tmp_path):
        trace = tmp_path / "trace.csv"
        self.write_trace(trace, [(0.05, 2)] * 2)
        config = make_config(
            {
                "sim.steps": 4,
                "generation.law": "trace-replay",
                "generation.trace_path": str(trace),
                "policy.kind": "static_sd",
            }
        )
        with pytest.raises(ValueError, match="no steps"):
            run(config)


class TestPolicyOverride:
    def test_run_accepts_explicit_policy(self):
        config = make_config({"sim.steps": 10, "sim.seed": 2})
        static = Policy(kind="static_sd", name="static_sd_3", static_gamma=3)
        record = run(config, policy=static)
        assert record.policy.name == "static_sd_3"
        assert np.all(record.sent == 3)

    def test_records_share_randomness_across_policies(self):
        # Common random numbers: the same seed gives every policy identical
        # per-step gains.
        config = make_config({"sim.steps": 15, "sim.seed": 8})
        rec_g = run(config, policy=Policy(kind="gelato", name="gelato"), seed=8)
        rec_s = run(
            config, policy=Policy(kind="static_sd", name="static_sd_5", static_gamma=5), seed=8
        )
        np.testing.assert_array_equal(rec_g.gain, rec_s.gain)
