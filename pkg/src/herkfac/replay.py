"""Episodic replay with hindsight goal relabeling.

Two relabeling modes are supported:

* ``sample`` (default): episodes are stored as collected and goals are
  rewritten when a minibatch is drawn, each transition with probability
  ``1 - 1/(1 + future_k)``.
* ``insert``: synthetic copies of each episode with substituted goals are
  written into the buffer at store time (one copy for ``final``, ``future_k``
  copies for the other strategies) and sampling is plain uniform.

Setting ``her=False`` turns relabeling off entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import compute_reward
from .errors import StateError, ValidationError

STRATEGIES = ("final", "future", "episode", "random")
MODES = ("sample", "insert")


@dataclass
class Episode:
    """One episode of ``T`` transitions stored as stacked arrays.

    ``obs`` and ``achieved_goal`` have ``T + 1`` rows (the last row is the
    state after the final action); ``goal``, ``action``, ``reward`` and
    ``done`` have ``T`` rows.
    """

    obs: np.ndarray
    achieved_goal: np.ndarray
    goal: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    done: np.ndarray

    @property
    def length(self) -> int:
        return self.action.shape[0]


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    goal: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    reward: float
    done: bool


@dataclass
class Batch:
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    goal: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    # bookkeeping, used by tests and diagnostics
    episode_index: np.ndarray
    t: np.ndarray
    relabeled: np.ndarray
    goal_source_t: np.ndarray  # transition index whose next_achieved_goal became the goal; -1 if original

    def __len__(self) -> int:
        return self.reward.shape[0]

    def transitions(self) -> list[Transition]:
        return [
            Transition(self.state[i], self.action[i], self.next_state[i], self.goal[i],
                       self.achieved_goal[i], self.next_achieved_goal[i],
                       float(self.reward[i]), bool(self.done[i]))
            for i in range(len(self))
        ]


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class HerBuffer:
    def __init__(self, capacity: int, eps: float, strategy: str = "future",
                 relabel_mode: str = "sample", future_k: int = 4, her: bool = True):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if relabel_mode not in MODES:
            raise ValueError(f"relabel_mode must be one of {MODES}")
        if future_k < 1:
            raise ValueError("future_k must be >= 1")
        self.capacity = capacity
        self.eps = eps
        self.strategy = strategy
        self.relabel_mode = relabel_mode
        self.future_k = future_k
        self.her = her
        self._arrays: dict[str, np.ndarray] | None = None
        self._next = 0
        self._size = 0
        self._stored_total = 0

    @property
    def relabel_prob(self) -> float:
        return 1.0 - 1.0 / (1.0 + self.future_k)

    def __len__(self) -> int:
        return self._size

    @property
    def horizon(self) -> int:
        if self._arrays is None:
            raise StateError("buffer is empty")
        return self._arrays["action"].shape[1]

    def validate(self, ep: Episode) -> None:
        T = ep.length
        if T < 1:
            raise ValidationError("episode has no transitions")
        if ep.obs.shape[0] != T + 1 or ep.achieved_goal.shape[0] != T + 1:
            raise ValidationError("obs/achieved_goal need T + 1 rows")
        if ep.goal.shape[0] != T or ep.reward.shape[0] != T or ep.done.shape[0] != T:
            raise ValidationError("goal/reward/done need T rows")
        if ep.goal.shape[1] != ep.achieved_goal.shape[1]:
            raise ValidationError("goal and achieved_goal dims differ")
        for name in ("obs", "achieved_goal", "goal", "action", "reward"):
            if not np.all(np.isfinite(getattr(ep, name))):
                raise ValidationError(f"episode {name} has non-finite entries")
        expected = compute_reward(ep.achieved_goal[1:], ep.goal, self.eps)
        if not np.array_equal(expected, ep.reward):
            raise ValidationError("stored rewards disagree with compute_reward")
        if self._arrays is not None:
            for name, arr in self._arrays.items():
                if arr.shape[1:] != np.shape(getattr(ep, name)):
                    raise ValidationError(f"episode {name} shape differs from buffer layout")

    def _write(self, ep: Episode) -> None:
        if self._arrays is None:
            self._arrays = {
                name: np.zeros((self.capacity, *np.shape(getattr(ep, name))))
                for name in ("obs", "achieved_goal", "goal", "action", "reward", "done")
            }
        for name, arr in self._arrays.items():
            arr[self._next] = getattr(ep, name)
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._stored_total += 1

    def store_episode(self, ep: Episode, rng=None) -> None:
        """Store ``ep``; in insert mode also store its relabeled copies.

        ``rng`` is only consumed by insert mode with a stochastic strategy.
        """
        self.validate(ep)
        self._write(ep)
        if not self.her or self.relabel_mode != "insert":
            return
        rng = _rng(rng)
        copies = 1 if self.strategy == "final" else self.future_k
        T = ep.length
        t = np.arange(T)
        for _ in range(copies):
            src = self._goal_sources(t, np.zeros(T, dtype=int), T, rng, episode=ep)
            goal = self._lookup_goals(src, ep)
            synth = Episode(ep.obs.copy(), ep.achieved_goal.copy(), goal, ep.action.copy(),
                            compute_reward(ep.achieved_goal[1:], goal, self.eps), ep.done.copy())
            self._write(synth)

    def _goal_sources(self, t, ep_idx, T, rng, episode=None):
        """Transition indices (and episodes) whose next_achieved_goal becomes the new goal."""
        n = t.shape[0]
        if self.strategy == "final":
            return ep_idx, np.full(n, T - 1)
        if self.strategy == "future":
            return ep_idx, rng.integers(t, T)
        if self.strategy == "episode":
            return ep_idx, rng.integers(0, T, size=n)
        # random: any stored transition
        return rng.integers(0, self._size, size=n), rng.integers(0, T, size=n)

    def _lookup_goals(self, src, episode: Episode | None = None):
        src_ep, src_t = src
        if episode is not None and self.strategy != "random":
            return episode.achieved_goal[src_t + 1].copy()
        return self._arrays["achieved_goal"][src_ep, src_t + 1]

    def sample(self, batch_size: int, rng_seed=None) -> Batch:
        if self._size == 0:
            raise StateError("cannot sample from an empty buffer")
        rng = _rng(rng_seed)
        A = self._arrays
        T = self.horizon
        ep = rng.integers(0, self._size, size=batch_size)
        t = rng.integers(0, T, size=batch_size)
        goal = A["goal"][ep, t].copy()
        relabeled = np.zeros(batch_size, dtype=bool)
        source_t = np.full(batch_size, -1)
        if self.her and self.relabel_mode == "sample":
            relabeled = rng.random(batch_size) < self.relabel_prob
            idx = np.flatnonzero(relabeled)
            src_ep, src_t = self._goal_sources(t[idx], ep[idx], T, rng)
            goal[idx] = A["achieved_goal"][src_ep, src_t + 1]
            source_t[idx] = np.where(src_ep == ep[idx], src_t, -2)
        next_ag = A["achieved_goal"][ep, t + 1]
        return Batch(
            state=A["obs"][ep, t],
            action=A["action"][ep, t],
            next_state=A["obs"][ep, t + 1],
            goal=goal,
            achieved_goal=A["achieved_goal"][ep, t],
            next_achieved_goal=next_ag,
            reward=compute_reward(next_ag, goal, self.eps),
            done=A["done"][ep, t].astype(bool),
            episode_index=ep,
            t=t,
            relabeled=relabeled,
            goal_source_t=source_t,
        )

    def episodes(self) -> list[Episode]:
        """Stored episodes, oldest first."""
        if self._arrays is None:
            return []
        start = self._next if self._size == self.capacity else 0
        order = [(start + i) % self.capacity for i in range(self._size)]
        A = self._arrays
        return [Episode(A["obs"][i].copy(), A["achieved_goal"][i].copy(), A["goal"][i].copy(),
                        A["action"][i].copy(), A["reward"][i].copy(), A["done"][i].astype(bool))
                for i in order]
