import dataclasses

import numpy as np
import pytest

from herkfac.agents import (AgentConfig, DdpgAgent, Td3Agent, make_agent, td_target_ddpg,
                            td_target_td3)
from herkfac.envs import EnvSpec, GoalObservation, PointReach
from herkfac.errors import NumericError
from herkfac.kfac import KfacConfig
from herkfac.nn import LayerSpec, forward, init_mlp
from herkfac.replay import Batch, HerBuffer

from conftest import rel_err
from test_replay import collect


def spec(obs=2, goal=2, act=2):
    return EnvSpec(obs, goal, act, -np.ones(act), np.ones(act), 10, 0.05)


def make_batch(rng, n=16, obs=2, goal=2, act=2, done=None, reward=None):
    return Batch(
        state=rng.uniform(-1, 1, (n, obs)), action=rng.uniform(-1, 1, (n, act)),
        next_state=rng.uniform(-1, 1, (n, obs)), goal=rng.uniform(-1, 1, (n, goal)),
        achieved_goal=np.zeros((n, goal)), next_achieved_goal=np.zeros((n, goal)),
        reward=reward if reward is not None else -rng.integers(0, 2, n).astype(float),
        done=done if done is not None else rng.random(n) < 0.3,
        episode_index=np.zeros(n, int), t=np.zeros(n, int), relabeled=np.zeros(n, bool),
        goal_source_t=-np.ones(n, int))


def set_constant(net, value):
    """Make ``net`` output ``value`` everywhere."""
    for layer in net.layers:
        layer.W[...] = 0.0
        layer.b[...] = 0.0
    net.layers[-1].b[...] = value


def filled_buffer(env, n=4):
    buf = HerBuffer(20, env.spec.success_tol)
    for s in range(n):
        buf.store_episode(collect(env, s))
    return buf


def test_select_action_deterministic_and_bounded(rng):
    agent = make_agent(spec(), AgentConfig(hidden=(8,)), seed=0)
    env = PointReach(2)
    o = env.reset(0)
    assert np.array_equal(agent.select_action(o), agent.select_action(o))
    for _ in range(200):
        a = agent.select_action(o, explore=True, rng=rng)
        assert np.all(a >= -1) and np.all(a <= 1)


def test_exploration_noise_std(rng):
    agent = make_agent(spec(), AgentConfig(hidden=(8,), explore_noise_std=0.1, random_eps=0.0), seed=0)
    set_constant(agent.actor, 0.0)  # tanh(0) = 0, far from the bounds
    obs = np.zeros((10_000, 2))
    noisy = agent.act(obs, obs, explore=True, rng=rng)
    clean = agent.act(obs, obs)
    assert abs(np.std(noisy - clean) - 0.1) < 0.005


def test_random_action_overlay_rate(rng):
    agent = make_agent(spec(), AgentConfig(hidden=(8,), explore_noise_std=0.0, random_eps=0.2), seed=0)
    set_constant(agent.actor, 0.0)
    a = agent.act(np.zeros((10_000, 2)), np.zeros((10_000, 2)), explore=True, rng=rng)
    assert abs(np.mean(np.any(a != 0.0, axis=1)) - 0.2) < 0.015


def test_ddpg_target_terminal_arithmetic_zero(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", gamma=0.5, clip_target=False, hidden=(8,)))
    b = make_batch(rng, done=np.ones(16, bool))
    assert np.array_equal(td_target_ddpg(agent, b), b.reward)

    set_constant(agent.target_critic, -2.0)
    b = make_batch(rng, done=np.zeros(16, bool), reward=-np.ones(16))
    assert np.allclose(td_target_ddpg(agent, b), -2.0)

    set_constant(agent.target_critic, 0.0)
    set_constant(agent.target_actor, 0.0)
    b = make_batch(rng, done=np.zeros(16, bool))
    assert np.array_equal(td_target_ddpg(agent, b), b.reward)


def test_td3_target_min_arithmetic(rng):
    agent = Td3Agent(spec(), AgentConfig(gamma=0.5, clip_target=False, target_noise_std=0.0, hidden=(8,)))
    set_constant(agent.target_critics[0], 3.0)
    set_constant(agent.target_critics[1], 5.0)
    b = make_batch(rng, done=np.zeros(16, bool), reward=np.zeros(16))
    assert np.allclose(td_target_td3(agent, b, rng), 1.5)


def test_td3_identical_twins_reduce_to_ddpg(rng):
    cfg = AgentConfig(target_noise_std=0.0, hidden=(8,))
    td3 = Td3Agent(spec(), cfg, seed=1)
    td3.target_critics[1] = td3.target_critics[0].copy()
    b = make_batch(rng)
    assert np.allclose(td_target_td3(td3, b, rng), td_target_ddpg(td3, b))


def test_target_clipping_bounds(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", gamma=0.9, hidden=(8,)))
    set_constant(agent.target_critic, 100.0)
    b = make_batch(rng, done=np.zeros(16, bool))
    assert np.all(td_target_ddpg(agent, b) == 0.0)
    set_constant(agent.target_critic, -1000.0)
    assert np.allclose(td_target_ddpg(agent, b), -10.0)


def test_critic_update_zero_residual_leaves_adam_params(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", optimizer="adam", hidden=(8,)))
    b = make_batch(rng, done=np.ones(16, bool), reward=np.full(16, -1.0))
    set_constant(agent.critic, -1.0)
    before = agent.critic.copy()
    loss, _ = agent.critic_update(b, rng)
    assert loss == 0.0
    assert all(np.array_equal(a.W, c.W) and np.array_equal(a.b, c.b)
               for a, c in zip(agent.critic.layers, before.layers))


def test_critic_regression_converges(rng):
    cfg = AgentConfig(algorithm="ddpg", optimizer="adam", adam_lr=3e-3, hidden=(16, 16))
    agent = DdpgAgent(spec(), cfg, seed=3)
    b = make_batch(rng, n=4, done=np.ones(4, bool))
    losses = [agent.critic_update(b, rng)[0] for _ in range(50)]
    assert all(y < x for x, y in zip(losses, losses[1:]))
    assert losses[-1] <= losses[0] / 10


def test_td3_loss_is_sum_of_critic_losses(rng):
    agent = Td3Agent(spec(), AgentConfig(optimizer="adam", hidden=(8,)), seed=2)
    b = make_batch(rng)
    y = agent.td_target(b, np.random.default_rng(9))[:, None]
    x = np.concatenate([b.state, b.goal, b.action], axis=1)
    parts = [np.mean((forward(c, x)[0] - y) ** 2) for c in agent.critics]
    loss, _ = agent.critic_update(b, np.random.default_rng(9))
    assert loss == pytest.approx(sum(parts), rel=1e-12)


def test_critic_update_nonfinite_leaves_params(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", hidden=(8,)))
    b = make_batch(rng)
    b.reward[0] = np.nan
    before = agent.critic.copy()
    with pytest.raises(NumericError):
        agent.critic_update(b, rng)
    assert all(np.array_equal(a.W, c.W) for a, c in zip(agent.critic.layers, before.layers))


def test_actor_update_zero_action_dependence(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", optimizer="adam", hidden=(8,)))
    agent.critic.layers[0].W[:, -2:] = 0.0  # critic ignores the action
    before = agent.actor.copy()
    agent.actor_update(make_batch(rng), rng)
    assert all(np.array_equal(a.W, c.W) for a, c in zip(agent.actor.layers, before.layers))


def test_actor_gradient_sign_analytic(rng):
    # Critic Q = -|u - 0.3| on the normalized action u, built from a relu pair.
    # With the actor outputting u = tanh(0) = 0 the loss falls as u rises.
    sp = EnvSpec(1, 1, 1, np.array([-10.0]), np.array([10.0]), 5, 0.05)
    agent = DdpgAgent(sp, AgentConfig(algorithm="ddpg", optimizer="adam", hidden=(4,)))
    b = make_batch(rng, n=4, obs=1, goal=1, act=1)
    b.state[:], b.goal[:] = 0.0, 0.0
    c = agent.critic
    set_constant(c, 0.0)
    c.layers[0].W[0, 2], c.layers[0].b[0] = 1.0, -0.3
    c.layers[0].W[1, 2], c.layers[0].b[1] = -1.0, 0.3
    c.layers[1].W[0, :2] = -1.0
    set_constant(agent.actor, 0.0)
    _, grads, _, _ = agent.actor_gradients(b)
    assert grads[-1].b[0] < 0
    agent.actor_update(b, rng)
    assert agent.select_action(GoalObservation(np.zeros(1), np.zeros(1), np.zeros(1)))[0] > 0


def test_actor_gradient_matches_finite_differences(rng):
    agent = DdpgAgent(spec(), AgentConfig(algorithm="ddpg", hidden=(5,)), seed=4)
    b = make_batch(rng, n=6)

    def loss():
        return agent.actor_gradients(b)[0]

    _, grads, _, _ = agent.actor_gradients(b)
    h = 1e-5
    for layer, g in zip(agent.actor.layers, grads):
        fd = np.zeros_like(layer.W)
        for idx in np.ndindex(layer.W.shape):
            old = layer.W[idx]
            layer.W[idx] = old + h
            up = loss()
            layer.W[idx] = old - h
            down = loss()
            layer.W[idx] = old
            fd[idx] = (up - down) / (2 * h)
        assert rel_err(g.W, fd) <= 1e-4


def test_actor_update_freezes_critics(rng):
    agent = Td3Agent(spec(), AgentConfig(hidden=(8,)), seed=0)
    snaps = [c.copy() for c in agent.critics]
    agent.actor_update(make_batch(rng), rng)
    for c, s in zip(agent.critics, snaps):
        assert all(np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b) for a, b in zip(c.layers, s.layers))


@pytest.mark.parametrize("delay,expected", [(2, 5), (1, 10), (3, 3)])
def test_delay_schedule(delay, expected):
    env = PointReach(2, horizon=10)
    agent = Td3Agent(env.spec, AgentConfig(policy_delay=delay, batch_size=8, hidden=(8,)), seed=0)
    buf = filled_buffer(env)
    rng = np.random.default_rng(0)
    for i in range(10):
        agent.train_step(buf, rng)
        assert agent.actor_update_count == agent.critic_update_count // delay
    assert agent.actor_update_count == expected


def test_ddpg_updates_actor_every_step():
    env = PointReach(2, horizon=10)
    agent = DdpgAgent(env.spec, AgentConfig(algorithm="ddpg", batch_size=8, hidden=(8,)), seed=0)
    buf = filled_buffer(env)
    rng = np.random.default_rng(0)
    for _ in range(4):
        assert agent.train_step(buf, rng).actor_loss is not None
    assert agent.actor_update_count == 4


def test_delayed_update_polyak_identity():
    env = PointReach(2, horizon=10)
    agent = Td3Agent(env.spec, AgentConfig(batch_size=8, tau=0.3, hidden=(8,)), seed=0)
    buf = filled_buffer(env)
    rng = np.random.default_rng(0)
    agent.train_step(buf, rng)  # critic only
    snap = agent.target_actor.copy()
    m = agent.train_step(buf, rng)  # critic + actor + targets
    assert m.actor_loss is not None
    for t, s, o in zip(agent.target_actor.layers, snap.layers, agent.actor.layers):
        assert np.allclose(t.W, 0.3 * o.W + 0.7 * s.W, rtol=0, atol=1e-15)


def test_smoothing_noise_clipped_and_actions_feasible(rng):
    agent = Td3Agent(spec(), AgentConfig(target_noise_std=5.0, target_noise_clip=0.5, hidden=(8,)))
    set_constant(agent.target_actor, 0.0)
    a = agent.smoothed_target_action(np.zeros((5000, 2)), np.zeros((5000, 2)), rng)
    assert np.max(np.abs(a)) <= 0.5
    agent.target_actor.layers[-1].b[...] = 10.0  # saturated at +1
    a = agent.smoothed_target_action(np.zeros((5000, 2)), np.zeros((5000, 2)), rng)
    assert np.all(a <= 1.0) and np.all(a >= 0.5 - 1e-6)


def test_twin_critics_are_independent():
    agent = Td3Agent(spec(), AgentConfig(hidden=(8,)), seed=0)
    assert not np.array_equal(agent.critics[0].layers[0].W, agent.critics[1].layers[0].W)
    assert [l.W.shape for l in agent.critics[0].layers] == [l.W.shape for l in agent.critics[1].layers]


def test_kfac_agent_trains_without_error():
    env = PointReach(2, horizon=10)
    agent = make_agent(env.spec, AgentConfig(batch_size=16, hidden=(8, 8)), KfacConfig(), seed=0)
    buf = filled_buffer(env)
    rng = np.random.default_rng(0)
    for _ in range(30):
        agent.train_step(buf, rng)
    assert agent.actor.all_finite() and all(c.all_finite() for c in agent.critics)
