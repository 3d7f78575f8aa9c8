from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_obs, tiny_arch
from pmodl.agents import (
    ActorCritic,
    DDPGConfig,
    FeedbackSample,
    OUNoise,
    PModLState,
    ReplayBuffer,
    Transition,
    actor_pmodl_update,
    coach_update,
    compute_z,
    critic_update,
    dagger_update,
    ddpg_actor_update,
    decay_factor,
    lambda_step,
    pmodl_loss,
    record_outcome,
    td_targets,
    update_lambda,
)
from pmodl.env import ActionBounds
from pmodl.errors import UsageError
from pmodl.neural import Adam, collate, forward_actor, init_params

BOUNDS = ActionBounds()


class TestBuffers:
    def test_ring_eviction(self):
        b = ReplayBuffer(2)
        for x in "abc":
            b.push(x)
        assert b.items() == ["b", "c"] and b.pushed == 3

    def test_seeded(self):
        b = ReplayBuffer(None)
        for i in range(100):
            b.push(i)
        assert b.sample(10, np.random.default_rng(4)) == b.sample(10, np.random.default_rng(4))

    def test_small_buffer_with_replacement(self):
        b = ReplayBuffer(10)
        for x in "xyz":
            b.push(x)
        batch = b.sample(5, np.random.default_rng(0))
        assert len(batch) == 5 and max(Counter(batch).values()) >= 2

    def test_no_replacement_when_large(self):
        b = ReplayBuffer(None)
        for i in range(64):
            b.push(i)
        batch = b.sample(64, np.random.default_rng(1))
        assert sorted(batch) == list(range(64))

    def test_empty(self):
        with pytest.raises(UsageError):
            ReplayBuffer(4).sample(1, np.random.default_rng(0))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 20), st.lists(st.integers(), max_size=60))
    def test_size_bound_and_order(self, cap, items):
        b = ReplayBuffer(cap)
        for x in items:
            b.push(x)
        assert len(b) <= cap
        assert b.items() == items[-cap:] if items else b.items() == []


class TestNoise:
    def test_sigma_zero_geometric(self):
        n = OUNoise(sigma=0.0, theta=0.15, dt=0.2, state=np.array([1.0, -2.0]))
        rng = np.random.default_rng(0)
        for k in range(1, 6):
            n.advance(rng)
            assert np.allclose(n.state, np.array([1.0, -2.0]) * (1 - 0.03) ** k)

    def test_decay(self):
        assert decay_factor(0, 500_000) == 1.0
        assert decay_factor(400_000, 500_000) == 0.05
        assert decay_factor(450_000, 500_000) == 0.05
        assert decay_factor(200_000, 500_000) == pytest.approx(1 - 0.95 / 2)
        assert decay_factor(3, 0) == 0.05

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 10**6))
    def test_decay_range(self, step, total):
        assert 0.05 <= decay_factor(step, total) <= 1.0

    def test_stationary_mean(self):
        n = OUNoise(dim=1, mu=0.0, sigma=0.3, theta=0.15, dt=0.2)
        rng = np.random.default_rng(7)
        for _ in range(2000):
            n.advance(rng)
        xs = np.array([n.advance(rng)[0] for _ in range(100_000)])
        # AR(1) with phi = 1 - theta*dt: effective sample size shrinks by (1 - phi) / (1 + phi)
        phi = 1 - 0.15 * 0.2
        var = 0.3**2 * 0.2 / (1 - phi**2)
        se = math.sqrt(var / len(xs) * (1 + phi) / (1 - phi))
        assert abs(xs.mean()) <= 3 * se

    def test_reset(self):
        n = OUNoise()
        n.advance(np.random.default_rng(0))
        n.reset()
        assert np.all(n.state == 0.0)


class TestPModLState:
    def test_fresh_zero(self):
        assert compute_z(PModLState()) == 0.0

    def test_counts(self):
        s = PModLState()
        for i in range(73):
            record_outcome(s, True)
        assert s.z == pytest.approx(0.73)

    def test_first_record(self):
        assert record_outcome(PModLState(), 1).z == pytest.approx(0.01)

    def test_last_hundred(self):
        rng = np.random.default_rng(0)
        seq = rng.random(150) < 0.6
        s = PModLState()
        for o in seq:
            record_outcome(s, o)
        assert s.z == pytest.approx(seq[-100:].mean())

    def test_alternating(self):
        s = PModLState()
        for i in range(200):
            record_outcome(s, i % 2 == 0)
        assert s.z == 0.5

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.booleans(), max_size=300), st.integers(1, 50))
    def test_z_is_padded_mean(self, outcomes, k):
        s = PModLState(capacity=k)
        for o in outcomes:
            record_outcome(s, o)
        assert 0.0 <= s.z <= 1.0
        assert s.z == pytest.approx(sum(outcomes[-k:]) / k) if outcomes else s.z == 0.0


class TestLambda:
    def test_hand_step(self):
        assert lambda_step(1.0, 6.0, 2.0, 0.025, 1.0) == pytest.approx(1.05)

    def test_clamp(self):
        assert lambda_step(1.0, 0.1, 5.0, 0.025, 1.0) == 1.0

    def test_fixed_point(self):
        assert lambda_step(3.0, 6.0, 2.0, 0.025, 1.0) == 3.0

    def test_non_finite_skipped(self, caplog):
        s = PModLState(lam=2.0)
        update_lambda(s, math.nan, 1.0)
        assert s.lam == 2.0 and "skipping" in caplog.text

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1.0, 100.0), st.floats(0.0, 1e3), st.floats(0.0, 1e3))
    def test_never_below_min(self, lam, g_rl, g_il):
        assert lambda_step(lam, g_rl, g_il, 0.025, 1.0) >= 1.0

    def test_mixed_value(self):
        assert pmodl_loss(0.5, 2.0, -3.0, 0.4) == pytest.approx(-1.1, abs=1e-12)


def _nets(seed=0, dtype="float64"):
    rng = np.random.default_rng(seed)
    return ActorCritic.create(tiny_arch("actor", dtype), tiny_arch("critic", dtype), DDPGConfig(), rng)


def _transitions(rng, n, terminal=False):
    return [
        Transition(random_obs(rng, k_min=1), rng.uniform([0, -1], [1, 1]), float(rng.normal()), random_obs(rng, k_min=1), terminal)
        for _ in range(n)
    ]


class TestDDPG:
    def test_td_targets(self):
        assert td_targets([-100.0], [True], [55.0], 0.99)[0] == -100.0
        assert td_targets([1.0], [False], [10.0], 0.99)[0] == pytest.approx(10.9, abs=1e-12)

    def test_critic_update_changes_critic_only(self):
        nets = _nets()
        rng = np.random.default_rng(1)
        before = {n: getattr(nets, n).flat() for n in ("actor", "target_actor", "target_critic")}
        loss = critic_update(nets, _transitions(rng, 8), 0.99)
        assert loss > 0
        for n, v in before.items():
            assert np.array_equal(getattr(nets, n).flat(), v)

    def test_zero_loss_only_decay(self):
        nets = _nets()
        rng = np.random.default_rng(2)
        batch = _transitions(rng, 4, terminal=True)
        obs = collate([t.obs for t in batch])
        from pmodl.neural import forward_critic

        q = forward_critic(nets.critic, obs, np.array([t.action for t in batch]))
        batch = [Transition(t.obs, t.action, float(qv), t.next_obs, True) for t, qv in zip(batch, q)]
        before = nets.critic.flat()
        assert critic_update(nets, batch, 0.99) == pytest.approx(0.0, abs=1e-20)
        assert np.allclose(nets.critic.flat(), before * (1 - 1e-3 * 0.01), rtol=1e-12, atol=1e-15)

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            DDPGConfig(gamma=1.0)
        with pytest.raises(ValueError):
            DDPGConfig(tau=0.0)


class TestActorUpdates:
    def _il(self, rng, n, coach=False):
        out = []
        for _ in range(n):
            a = rng.uniform([0, -1], [1, 1])
            h = rng.integers(-1, 2, size=2).astype(float) if coach else None
            out.append(FeedbackSample(random_obs(rng, k_min=1), a, h))
        return out

    def test_z_one_equals_ddpg(self):
        rng = np.random.default_rng(3)
        rl = _transitions(rng, 6)
        il = self._il(rng, 6)
        a, b = _nets(5), _nets(5)
        actor_pmodl_update(a, rl, il, PModLState(lam=3.0), 1.0, BOUNDS)
        ddpg_actor_update(b, rl)
        assert np.array_equal(a.actor.flat(), b.actor.flat())

    def test_lambda_updated_before_step(self):
        rng = np.random.default_rng(4)
        nets = _nets(1)
        s = PModLState()
        stats = actor_pmodl_update(nets, _transitions(rng, 6), self._il(rng, 6), s, 0.3, BOUNDS)
        expect = lambda_step(1.0, stats.g_rl, stats.g_il, 0.025, 1.0)
        assert stats.lam == s.lam == pytest.approx(expect)
        assert stats.loss == pytest.approx(0.3 * stats.j_rl + stats.lam * 0.7 * stats.j_il)

    def test_fixed_lambda_mode(self):
        rng = np.random.default_rng(4)
        s = PModLState(lam=10.0)
        actor_pmodl_update(_nets(1), _transitions(rng, 6), self._il(rng, 6), s, 0.3, BOUNDS, adaptive=False)
        assert s.lam == 10.0

    def test_dagger_overfits_single_pair(self):
        rng = np.random.default_rng(6)
        nets = _nets(2)
        o = random_obs(rng, k_min=2)
        label = np.array([0.8, -0.4])
        d = ReplayBuffer(None)
        d.push(FeedbackSample(o, label))
        opt = Adam(lr=3e-3)
        losses = [dagger_update(nets.actor, opt, d, 1, rng, BOUNDS).loss for _ in range(300)]
        assert np.allclose(forward_actor(nets.actor, collate([o]))[0], label, atol=1e-2)
        assert np.mean(losses[-20:]) < np.mean(losses[:20])

    def test_dagger_descends_on_frozen_dataset(self):
        rng = np.random.default_rng(7)
        nets = _nets(3)
        d = ReplayBuffer(None)
        for s in self._il(rng, 16):
            d.push(s)
        opt = Adam(lr=1e-3)
        losses = [dagger_update(nets.actor, opt, d, 16, rng, BOUNDS).loss for _ in range(100)]
        assert np.mean(losses[-10:]) <= np.mean(losses[:10])

    def test_coach_moves_towards_label(self):
        rng = np.random.default_rng(8)
        nets = _nets(4)
        o = random_obs(rng, k_min=2)
        a = forward_actor(nets.actor, collate([o]))[0]
        h = np.array([1.0, -1.0])
        ring = ReplayBuffer(256)
        ring.push(FeedbackSample(o, a, h))
        label = np.clip(a + 0.5 * h, BOUNDS.low, BOUNDS.high)
        before = np.linalg.norm(a - label)
        coach_update(nets.actor, Adam(lr=1e-3), ring, 1, rng, BOUNDS, error=0.5)
        after = np.linalg.norm(forward_actor(nets.actor, collate([o]))[0] - label)
        assert after < before

    def test_coach_zero_feedback_label_is_action(self):
        from pmodl.agents import il_labels

        rng = np.random.default_rng(9)
        samples = [FeedbackSample(random_obs(rng), np.array([0.3, 0.2]), np.zeros(2))]
        assert np.array_equal(il_labels(samples, 0.5, BOUNDS), [[0.3, 0.2]])
        clipped = il_labels([FeedbackSample(samples[0].obs, np.array([0.9, -0.9]), np.array([1.0, -1.0]))], 0.5, BOUNDS)
        assert np.array_equal(clipped, [[1.0, -1.0]])

    def test_empty_datasets(self):
        nets = _nets()
        with pytest.raises(UsageError):
            dagger_update(nets.actor, Adam(), ReplayBuffer(None), 4, np.random.default_rng(0), BOUNDS)
        with pytest.raises(UsageError):
            coach_update(nets.actor, Adam(), ReplayBuffer(256), 4, np.random.default_rng(0), BOUNDS)
