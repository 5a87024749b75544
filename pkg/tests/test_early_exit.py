"""Tests for the leaky-bucket early-exit inner loop."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsim.early_exit import UncertaintyBucket, bucket_step, default_cap, drafting_loop
from specsim.generation import DraftToken, phi_inverse

H_TH = phi_inverse(0.9, 0.35)  # 0.3010300447366465


def make_bucket(fill=0.0, drain=H_TH, cap=None):
    return UncertaintyBucket(
        fill_nats=fill, drain_nats=drain, cap_nats=default_cap(drain) if cap is None else cap
    )


def tokens_from_entropies(entropies):
    return [DraftToken(entropy_nats=h, topp_size=1, accept_draw=0.5) for h in entropies]


class TestBucketStep:
    def test_frozen_update(self):
        # fill 0, H = 0.5: max(0, 0.5 - 0.3010300447366465) = 0.1989699552633535
        bucket = bucket_step(make_bucket(), 0.5)
        assert bucket.fill_nats == pytest.approx(0.1989699552633535, rel=1e-12)

    def test_drain_threshold_is_fixed_point(self):
        bucket = bucket_step(make_bucket(fill=0.0), H_TH)
        assert bucket.fill_nats == 0.0

    def test_clamps_at_zero(self):
        bucket = bucket_step(make_bucket(fill=0.1), 0.0)
        assert bucket.fill_nats == 0.0

    @given(
        fill=st.floats(min_value=0.0, max_value=10.0),
        entropy=st.floats(min_value=0.0, max_value=10.0),
        drain=st.floats(min_value=1e-3, max_value=10.0),
    )
    def test_lindley_identity(self, fill, entropy, drain):
        bucket = UncertaintyBucket(fill_nats=fill, drain_nats=drain, cap_nats=1.0)
        stepped = bucket_step(bucket, entropy)
        assert stepped.fill_nats == max(0.0, fill + entropy - drain)
        assert stepped.drain_nats == drain
        assert stepped.cap_nats == bucket.cap_nats

    def test_rejects_negative_entropy(self):
        with pytest.raises(ValueError):
            bucket_step(make_bucket(), -0.1)


class TestDefaultCap:
    def test_frozen_value(self):
        # 1.2 * drain threshold.
        assert default_cap(H_TH) == pytest.approx(0.3612360536839758, rel=1e-12)

    def test_multiplier(self):
        assert default_cap(1.0, multiplier=2.5) == 2.5

    def test_validation(self):
        with pytest.raises(ValueError):
            default_cap(0.0)
        with pytest.raises(ValueError):
            default_cap(1.0, multiplier=0.0)


def brute_force_sent(entropies, bucket):
    """Independent first-overflow scan of the same recursion."""
    fill = bucket.fill_nats
    for i, h in enumerate(entropies):
        fill = max(0.0, fill + h - bucket.drain_nats)
        if fill > bucket.cap_nats:
            return i + 1
    return len(entropies)


class TestDraftingLoop:
    def test_calm_block_reaches_budget(self):
        tokens = tokens_from_entropies([0.1] * 5)
        drafted, sent = drafting_loop(5, lambda i: tokens[i], make_bucket())
        assert sent == 5
        assert drafted == tokens

    def test_overflowing_token_is_kept(self):
        # Third token pushes fill past the cap; it is drafted, then the loop
        # stops without consuming the fourth.
        entropies = [0.1, 0.1, 5.0, 0.1]
        tokens = tokens_from_entropies(entropies)
        consumed = []

        def draw(i):
            consumed.append(i)
            return tokens[i]

        drafted, sent = drafting_loop(4, draw, make_bucket())
        assert sent == 3
        assert drafted == tokens[:3]
        assert consumed == [0, 1, 2]

    def test_single_token_overflow(self):
        tokens = tokens_from_entropies([10.0])
        drafted, sent = drafting_loop(3, lambda i: tokens[i] if i == 0 else None, make_bucket())
        assert sent == 1

    def test_threshold_entropies_never_trigger(self):
        tokens = tokens_from_entropies([H_TH] * 8)
        _, sent = drafting_loop(8, lambda i: tokens[i], make_bucket())
        assert sent == 8

    def test_initial_fill_carries_in(self):
        # fill 0.3 + (0.4 - drain) = 0.3989... > cap 0.3612...: overflow at once.
        tokens = tokens_from_entropies([0.4])
        _, sent = drafting_loop(1, lambda i: tokens[i], make_bucket(fill=0.3))
        assert sent == 1

    def test_rejects_bad_budget(self):
        with pytest.raises(ValueError):
            drafting_loop(0, lambda i: None, make_bucket())

    @given(
        entropies=st.lists(
            st.floats(min_value=0.0, max_value=2.0), min_size=1, max_size=12
        ),
        drain=st.floats(min_value=0.05, max_value=1.0),
        cap_mult=st.floats(min_value=1.0, max_value=3.0),
        fill=st.floats(min_value=0.0, max_value=0.5),
    )
    @settings(max_examples=300)
    def test_matches_first_overflow_oracle(self, entropies, drain, cap_mult, fill):
        bucket = UncertaintyBucket(
            fill_nats=fill, drain_nats=drain, cap_nats=default_cap(drain, cap_mult)
        )
        tokens = tokens_from_entropies(entropies)
        budget = len(entropies)
        drafted, sent = drafting_loop(budget, lambda i: tokens[i], bucket)
        assert 1 <= sent <= budget
        assert sent == brute_force_sent(entropies, bucket)
        assert drafted == tokens[:sent]

    def test_random_blocks_against_oracle(self):
        # 10^4 sampled blocks against the independent scan.
        rng = np.random.default_rng(2024)
        bucket = make_bucket()
        for _ in range(10_000):
            budget = int(rng.integers(1, 9))
            entropies = rng.gamma(2.0, H_TH / 2.0, size=budget).tolist()
            tokens = tokens_from_entropies(entropies)
            _, sent = drafting_loop(budget, lambda i: tokens[i], bucket)
            assert sent == brute_force_sent(entropies, bucket)


class TestBucketValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            UncertaintyBucket(fill_nats=-0.1, drain_nats=1.0, cap_nats=1.0)
        with pytest.raises(ValueError):
            UncertaintyBucket(fill_nats=0.0, drain_nats=0.0, cap_nats=1.0)
        with pytest.raises(ValueError):
            UncertaintyBucket(fill_nats=0.0, drain_nats=1.0, cap_nats=0.0)
