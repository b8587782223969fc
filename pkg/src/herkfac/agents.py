"""Goal-conditioned DDPG and TD3 agents on top of the numpy MLPs.

The actor sees ``obs ‖ goal`` and outputs a tanh-squashed action in
normalized units ``[-1, 1]``; the critic sees ``obs ‖ goal ‖ action`` with
the action in the same normalized units.  Exploration and smoothing noise
standard deviations are expressed in normalized units as well.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .envs import EnvSpec, GoalObservation
from .errors import NumericError
from .kfac import AdamOptimizer, KfacConfig, KfacOptimizer, sample_fisher_stats
from .nn import Mlp, backward, forward, grad_through_input, init_mlp, mlp_spec, polyak_update
from .replay import Batch, HerBuffer

ALGORITHMS = ("ddpg", "td3")
OPTIMIZERS = ("kfac", "adam")


@dataclass
class AgentConfig:
    algorithm: str = "td3"
    optimizer: str = "kfac"
    gamma: float = 0.98
    tau: float = 0.05
    explore_noise_std: float = 0.1
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    batch_size: int = 128
    hidden: tuple[int, ...] = (64, 64, 64)
    adam_lr: float = 1e-3
    clip_target: bool = True
    random_eps: float = 0.2
    action_l2: float = 0.0
    bootstrap_timeouts: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.explore_noise_std < 0 or self.target_noise_std < 0 or self.target_noise_clip < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.policy_delay < 1 or self.batch_size < 1:
            raise ValueError("policy_delay and batch_size must be >= 1")
        if self.action_l2 < 0:
            raise ValueError("action_l2 must be non-negative")
        if not 0.0 <= self.random_eps <= 1.0:
            raise ValueError("random_eps must lie in [0, 1]")
        if not self.adam_lr > 0 or any(h < 1 for h in self.hidden):
            raise ValueError("adam_lr and hidden sizes must be positive")


@dataclass
class StepMetrics:
    critic_loss: float
    q_mean: float
    actor_loss: float | None = None


class GoalAgent:
    """State shared by DDPG and TD3; subclasses define the TD target."""

    n_critics = 1

    def __init__(self, env_spec: EnvSpec, cfg: AgentConfig | None = None,
                 kfac_cfg: KfacConfig | None = None, seed: int = 0):
        self.env_spec = env_spec
        self.cfg = cfg or AgentConfig()
        self.kfac_cfg = kfac_cfg or KfacConfig()
        self.actor_in = env_spec.obs_dim + env_spec.goal_dim
        self.critic_in = self.actor_in + env_spec.action_dim
        self._center = (env_spec.action_high + env_spec.action_low) / 2.0
        self._half = (env_spec.action_high - env_spec.action_low) / 2.0

        seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=1 + self.n_critics)
        hidden = list(self.cfg.hidden)
        self.actor = init_mlp(mlp_spec(self.actor_in, hidden, env_spec.action_dim, "tanh"), int(seeds[0]))
        self.critics = [init_mlp(mlp_spec(self.critic_in, hidden, 1, "identity"), int(s))
                        for s in seeds[1:]]
        self.target_actor = self.actor.copy()
        self.target_critics = [c.copy() for c in self.critics]
        self.actor_opt = self._make_optimizer(self.actor)
        self.critic_opts = [self._make_optimizer(c) for c in self.critics]
        self.critic_update_count = 0
        self.actor_update_count = 0

    @property
    def critic(self) -> Mlp:
        return self.critics[0]

    @property
    def target_critic(self) -> Mlp:
        return self.target_critics[0]

    def networks(self) -> dict[str, Mlp]:
        nets = {"actor": self.actor, "target_actor": self.target_actor}
        for i, (c, t) in enumerate(zip(self.critics, self.target_critics), start=1):
            suffix = "" if self.n_critics == 1 else str(i)
            nets[f"critic{suffix}"] = c
            nets[f"target_critic{suffix}"] = t
        return nets

    def _make_optimizer(self, net: Mlp):
        if self.cfg.optimizer == "kfac":
            return KfacOptimizer(net, self.kfac_cfg)
        return AdamOptimizer(net, self.cfg.adam_lr)

    def reset_optimizers(self) -> None:
        self.actor_opt = self._make_optimizer(self.actor)
        self.critic_opts = [self._make_optimizer(c) for c in self.critics]

    # -- acting ---------------------------------------------------------------

    def normalize_action(self, action) -> np.ndarray:
        return (np.asarray(action, dtype=np.float64) - self._center) / self._half

    def act(self, obs, goal, explore: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        """Batched actions in environment units for ``obs``/``goal`` rows.

        With ``explore`` the draw order from ``rng`` is: Gaussian noise
        (batch × action_dim), then one uniform per row for the random-action
        overlay, then uniform random actions (batch × action_dim).
        """
        obs = np.atleast_2d(obs)
        goal = np.atleast_2d(goal)
        u = self.actor(np.concatenate([obs, goal], axis=1))
        if explore:
            if rng is None:
                raise ValueError("exploration needs an rng")
            u = u + self.cfg.explore_noise_std * rng.standard_normal(u.shape)
            u = np.clip(u, -1.0, 1.0)
            take_random = rng.random(u.shape[0]) < self.cfg.random_eps
            random_u = rng.uniform(-1.0, 1.0, u.shape)
            u = np.where(take_random[:, None], random_u, u)
        action = self._center + self._half * u
        return np.clip(action, self.env_spec.action_low, self.env_spec.action_high)

    def select_action(self, obs: GoalObservation, explore: bool = False,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        return self.act(obs.observation, obs.desired_goal, explore, rng)[0]

    # -- learning -------------------------------------------------------------

    def _actor_input(self, state, goal) -> np.ndarray:
        return np.concatenate([state, goal], axis=1)

    def _critic_input(self, state, goal, u) -> np.ndarray:
        return np.concatenate([state, goal, u], axis=1)

    def _finish_target(self, batch: Batch, next_q: np.ndarray) -> np.ndarray:
        not_done = 1.0 - np.asarray(batch.done, dtype=np.float64)
        y = np.asarray(batch.reward, dtype=np.float64) + self.cfg.gamma * not_done * next_q
        if self.cfg.clip_target:
            low = -1.0 / (1.0 - self.cfg.gamma) if self.cfg.gamma < 1.0 else -np.inf
            y = np.clip(y, low, 0.0)
        return y

    def td_target(self, batch: Batch, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def critic_update(self, batch: Batch, rng: np.random.Generator | None = None) -> tuple[float, float]:
        """Regress every critic onto the shared TD target; returns (loss, mean Q).

        The loss is the sum of per-critic mean squared errors, measured before
        the update.
        """
        rng = rng if rng is not None else np.random.default_rng()
        y = self.td_target(batch, rng)[:, None]
        x = self._critic_input(batch.state, batch.goal, self.normalize_action(batch.action))
        passes = [forward(c, x) for c in self.critics]
        losses = [float(np.mean((q - y) ** 2)) for q, _ in passes]
        if not np.all(np.isfinite(losses)):
            raise NumericError("non-finite critic loss; update skipped")
        for critic, opt, (q, cache) in zip(self.critics, self.critic_opts, passes):
            grads, _ = backward(critic, cache, 2.0 * (q - y))
            stats = None
            if opt.needs_curvature:
                stats = sample_fisher_stats(critic, x, rng, self.kfac_cfg.fisher_noise_std, cache=cache)
            opt.step(critic, grads, stats)
        self.critic_update_count += 1
        return float(sum(losses)), float(np.mean(passes[0][0]))

    def actor_gradients(self, batch: Batch):
        """Loss ``-mean Q1(s‖g, P(s‖g))`` and its actor gradients (critic frozen).

        With ``action_l2 > 0`` the loss also carries ``action_l2 * mean(u²)``
        over all normalized action entries.
        """
        x = self._actor_input(batch.state, batch.goal)
        u, acache = forward(self.actor, x)
        q, ccache = forward(self.critic, self._critic_input(batch.state, batch.goal, u))
        loss = -float(np.mean(q)) + self.cfg.action_l2 * float(np.mean(u * u))
        if not np.isfinite(loss):
            raise NumericError("non-finite actor loss; update skipped")
        dx = grad_through_input(self.critic, ccache, -np.ones_like(q))
        du = dx[:, -self.env_spec.action_dim:]
        if self.cfg.action_l2:
            du = du + self.cfg.action_l2 * 2.0 * u / u.shape[1]
        grads, _ = backward(self.actor, acache, du)
        return loss, grads, x, acache

    def actor_update(self, batch: Batch, rng: np.random.Generator | None = None) -> float:
        rng = rng if rng is not None else np.random.default_rng()
        loss, grads, x, acache = self.actor_gradients(batch)
        stats = None
        if self.actor_opt.needs_curvature:
            stats = sample_fisher_stats(self.actor, x, rng, self.kfac_cfg.fisher_noise_std, cache=acache)
        self.actor_opt.step(self.actor, grads, stats)
        self.actor_update_count += 1
        return loss

    def update_targets(self) -> None:
        polyak_update(self.target_actor, self.actor, self.cfg.tau)
        for t, c in zip(self.target_critics, self.critics):
            polyak_update(t, c, self.cfg.tau)

    def _actor_due(self) -> bool:
        return True

    def train_step(self, buf: HerBuffer, rng: np.random.Generator) -> StepMetrics:
        """One critic update, plus an actor and target update when one is due.

        Stored ``done`` flags only mark the time limit.  With
        ``bootstrap_timeouts`` they are cleared before the TD target is formed,
        since the state carries no clock and cutting the bootstrap there makes
        the regression target inconsistent.
        """
        batch = buf.sample(self.cfg.batch_size, rng)
        if self.cfg.bootstrap_timeouts:
            batch = dataclasses.replace(batch, done=np.zeros_like(batch.done))
        critic_loss, q_mean = self.critic_update(batch, rng)
        metrics = StepMetrics(critic_loss, q_mean)
        if self._actor_due():
            metrics.actor_loss = self.actor_update(batch, rng)
            self.update_targets()
        return metrics


class DdpgAgent(GoalAgent):
    n_critics = 1

    def td_target(self, batch: Batch, rng=None) -> np.ndarray:
        """``y = r + γ (1 − done) Q'(s'‖g, P'(s'‖g))``."""
        xn = self._actor_input(batch.next_state, batch.goal)
        un = self.target_actor(xn)
        next_q = self.target_critic(self._critic_input(batch.next_state, batch.goal, un))[:, 0]
        return self._finish_target(batch, next_q)


class Td3Agent(GoalAgent):
    n_critics = 2

    def smoothed_target_action(self, next_state, goal, rng: np.random.Generator) -> np.ndarray:
        """Target action plus clipped Gaussian noise, clipped to the action box (normalized)."""
        un = self.target_actor(self._actor_input(next_state, goal))
        noise = np.clip(self.cfg.target_noise_std * rng.standard_normal(un.shape),
                        -self.cfg.target_noise_clip, self.cfg.target_noise_clip)
        return np.clip(un + noise, -1.0, 1.0)

    def td_target(self, batch: Batch, rng=None) -> np.ndarray:
        """Clipped double-Q target with target-policy smoothing."""
        rng = rng if rng is not None else np.random.default_rng()
        un = self.smoothed_target_action(batch.next_state, batch.goal, rng)
        xn = self._critic_input(batch.next_state, batch.goal, un)
        next_q = np.minimum(*(t(xn)[:, 0] for t in self.target_critics))
        return self._finish_target(batch, next_q)

    def _actor_due(self) -> bool:
        return self.critic_update_count % self.cfg.policy_delay == 0


def make_agent(env_spec: EnvSpec, cfg: AgentConfig | None = None,
               kfac_cfg: KfacConfig | None = None, seed: int = 0) -> GoalAgent:
    cfg = cfg or AgentConfig()
    cls = Td3Agent if cfg.algorithm == "td3" else DdpgAgent
    return cls(env_spec, cfg, kfac_cfg, seed)


def td_target_ddpg(agent: GoalAgent, batch: Batch) -> np.ndarray:
    return DdpgAgent.td_target(agent, batch)


def td_target_td3(agent: Td3Agent, batch: Batch, rng: np.random.Generator) -> np.ndarray:
    return agent.td_target(batch, rng)
