"""Epoch/cycle training loop and the evaluation protocol."""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents import GoalAgent, make_agent
from ..envs import GoalEnv, make_env
from ..replay import Episode, HerBuffer
from .checkpoint import save_checkpoint
from .config import TrainConfig, dump_config

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("epoch", "env_steps", "train_success_rate", "eval_success_rate",
                   "actor_loss", "critic_loss", "q_mean", "wall_time_s")


@dataclass
class MetricsRow:
    epoch: int
    env_steps: int
    train_success_rate: float
    eval_success_rate: float
    actor_loss: float
    critic_loss: float
    q_mean: float
    wall_time_s: float

    def as_csv(self) -> list[str]:
        return [str(self.epoch), str(self.env_steps)] + [
            repr(float(getattr(self, c))) for c in METRICS_COLUMNS[2:]
        ]


def rollout(agent: GoalAgent, envs: list[GoalEnv], seeds, explore: bool,
            rng: np.random.Generator | None = None) -> tuple[list[Episode], np.ndarray]:
    """Run one episode in each env in lock-step; returns episodes and final-step success.

    All envs must share a horizon.  Actions for every env are drawn in one
    batched call per timestep, so the rng draw order is timestep-major.
    """
    T = envs[0].spec.horizon
    first = [env.reset(int(s)) for env, s in zip(envs, seeds)]
    n = len(envs)
    obs = np.zeros((n, T + 1, envs[0].spec.obs_dim))
    ag = np.zeros((n, T + 1, envs[0].spec.goal_dim))
    goal = np.stack([o.desired_goal for o in first])
    actions = np.zeros((n, T, envs[0].spec.action_dim))
    rewards = np.zeros((n, T))
    success = np.zeros(n, dtype=bool)
    obs[:, 0] = [o.observation for o in first]
    ag[:, 0] = [o.achieved_goal for o in first]
    for t in range(T):
        a = agent.act(obs[:, t], goal, explore=explore, rng=rng)
        actions[:, t] = a
        for i, env in enumerate(envs):
            o, r, _, ok = env.step(a[i])
            obs[i, t + 1] = o.observation
            ag[i, t + 1] = o.achieved_goal
            rewards[i, t] = r
            success[i] = ok
    done = np.zeros(T, dtype=bool)
    done[-1] = True
    episodes = [
        Episode(obs[i], ag[i], np.repeat(goal[i][None], T, axis=0), actions[i], rewards[i], done.copy())
        for i in range(n)
    ]
    return episodes, success


def evaluate(agent: GoalAgent, env: GoalEnv, n: int, seed: int) -> float:
    """Mean final-step success over ``n`` noise-free episodes seeded ``seed .. seed+n-1``."""
    if n < 1:
        raise ValueError("evaluate needs n >= 1")
    envs = [env.clone() for _ in range(n)]
    _, success = rollout(agent, envs, range(seed, seed + n), explore=False)
    return float(np.mean(success))


def build(cfg: TrainConfig) -> tuple[GoalEnv, GoalAgent, HerBuffer]:
    env = make_env(cfg.env.name, **cfg.env.params)
    agent = make_agent(env.spec, cfg.agent, cfg.kfac, seed=cfg.seed)
    r = cfg.replay
    buf = HerBuffer(r.capacity, env.spec.success_tol, r.strategy, r.relabel_mode, r.future_k, r.her)
    return env, agent, buf


def train(cfg: TrainConfig, out_dir: str | Path | None = None) -> tuple[GoalAgent, list[MetricsRow]]:
    """Train an agent from ``cfg``; returns the agent and one metrics row per epoch.

    Randomness comes from a single generator seeded with ``cfg.seed``.  Draw
    order: the evaluation seed base (one integer), then per cycle the episode
    seeds (``episodes_per_cycle`` integers), the rollout exploration draws,
    the insert-mode relabeling draws, and the draws of each train step
    (minibatch indices, relabeling, target smoothing, Fisher noise).
    Agent initialization uses its own generator seeded from ``cfg.seed``.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")

    env, agent, buf = build(cfg)
    rng = np.random.default_rng(cfg.seed)
    eval_seed = int(rng.integers(0, 2**31 - 1 - cfg.eval_episodes))
    envs = [env.clone() for _ in range(cfg.episodes_per_cycle)]
    T = env.spec.horizon

    rows: list[MetricsRow] = []
    env_steps = 0
    start = time.perf_counter()
    ckpt = out / "checkpoint.tdhk"
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        fh.flush()
        for epoch in range(1, cfg.epochs + 1):
            successes, actor_losses, critic_losses, q_means = [], [], [], []
            for _ in range(cfg.cycles_per_epoch):
                seeds = rng.integers(0, 2**31 - 1, size=cfg.episodes_per_cycle)
                episodes, success = rollout(agent, envs, seeds, explore=True, rng=rng)
                successes.extend(success.tolist())
                for ep in episodes:
                    buf.store_episode(ep, rng)
                env_steps += cfg.episodes_per_cycle * T
                for _ in range(cfg.optimizer_steps_per_cycle):
                    m = agent.train_step(buf, rng)
                    critic_losses.append(m.critic_loss)
                    q_means.append(m.q_mean)
                    if m.actor_loss is not None:
                        actor_losses.append(m.actor_loss)
            eval_rate = evaluate(agent, env, cfg.eval_episodes, eval_seed)
            row = MetricsRow(
                epoch=epoch,
                env_steps=env_steps,
                train_success_rate=float(np.mean(successes)),
                eval_success_rate=eval_rate,
                actor_loss=float(np.mean(actor_losses)) if actor_losses else 0.0,
                critic_loss=float(np.mean(critic_losses)),
                q_mean=float(np.mean(q_means)),
                wall_time_s=round(time.perf_counter() - start, 3) if cfg.record_wall_time else 0.0,
            )
            rows.append(row)
            writer.writerow(row.as_csv())
            fh.flush()
            log.info("epoch %d  eval %.3f  train %.3f  critic %.4f  actor %.4f", epoch,
                     row.eval_success_rate, row.train_success_rate, row.critic_loss, row.actor_loss)
            last = epoch == cfg.epochs
            stop = cfg.stop_at_success is not None and eval_rate >= cfg.stop_at_success
            if epoch % cfg.checkpoint_every == 0 or last or stop:
                save_checkpoint(agent, ckpt)
            if stop:
                break
    return agent, rows


def read_metrics(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_COLUMNS:
            raise ValueError(f"{path}: not a metrics CSV")
        rows = []
        for rec in reader:
            rows.append(MetricsRow(int(rec[0]), int(rec[1]), *[float(v) for v in rec[2:]]))
    return rows


def row_dict(row: MetricsRow) -> dict:
    return dataclasses.asdict(row)
