"""Small goal-conditioned environments with sparse {-1, 0} rewards.

``point_reach(n)``
    Point mass in ``[-1, 1]^n``; the goal is a target position.
``push_box``
    A point agent on a 2-D table must push an axis-aligned square box onto
    a target location.  Success needs two phases: reach the box, then push.
``bit_flip(n)``
    ``n`` bits; the continuous action selects the bit to flip via argmax.

Rewards come from :func:`compute_reward`, which only looks at its arguments.
Hindsight relabeling relies on that.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, StateError


@dataclass(frozen=True)
class GoalObservation:
    observation: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    goal_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int
    success_tol: float


def compute_reward(achieved, desired, eps: float):
    """0 where ``‖achieved − desired‖ < eps`` and -1 elsewhere.

    Works on single goals (returns a float) or on stacked goals along the
    leading axes (returns an array).
    """
    achieved = np.asarray(achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    if achieved.shape != desired.shape:
        raise ShapeError(f"goal shapes differ: {achieved.shape} vs {desired.shape}")
    dist = np.linalg.norm(achieved - desired, axis=-1)
    r = -(dist >= eps).astype(np.float64)
    return float(r) if r.ndim == 0 else r


class GoalEnv:
    spec: EnvSpec
    name: str = "env"

    def __init__(self):
        self._t = 0
        self._done = True
        self._goal: np.ndarray | None = None

    def clone(self) -> "GoalEnv":
        return copy.deepcopy(self)

    def compute_reward(self, achieved, desired):
        return compute_reward(achieved, desired, self.spec.success_tol)

    def reset(self, seed: int) -> GoalObservation:
        rng = np.random.default_rng(seed)
        self._reset_state(rng)
        self._t = 0
        self._done = False
        return self._observe()

    def step(self, action) -> tuple[GoalObservation, float, bool, bool]:
        if self._done:
            raise StateError("step() called on a finished episode; call reset()")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape[0] != self.spec.action_dim:
            raise ShapeError(f"action dim {action.shape[0]} != {self.spec.action_dim}")
        action = np.clip(action, self.spec.action_low, self.spec.action_high)
        self._transition(action)
        self._t += 1
        obs = self._observe()
        reward = self.compute_reward(obs.achieved_goal, obs.desired_goal)
        self._done = self._t >= self.spec.horizon
        return obs, reward, self._done, reward == 0.0

    def _reset_state(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _transition(self, action: np.ndarray) -> None:
        raise NotImplementedError

    def _observe(self) -> GoalObservation:
        raise NotImplementedError


class PointReach(GoalEnv):
    name = "point_reach"
    dt = 0.1

    def __init__(self, n: int = 3, horizon: int = 50, tol: float = 0.05,
                 start_range: float = 1.0, goal_range: float = 1.0):
        super().__init__()
        if n < 1:
            raise ConfigError("point_reach needs n >= 1")
        if not (0.0 <= start_range <= 1.0 and 0.0 < goal_range <= 1.0):
            raise ConfigError("point_reach ranges must lie in [0, 1]")
        self.n = n
        self.start_range = start_range
        self.goal_range = goal_range
        self.spec = EnvSpec(n, n, n, -np.ones(n), np.ones(n), horizon, tol)
        self._pos = np.zeros(n)

    def _reset_state(self, rng):
        self._pos = rng.uniform(-self.start_range, self.start_range, self.n)
        goal = rng.uniform(-self.goal_range, self.goal_range, self.n)
        while np.linalg.norm(goal - self._pos) < 2 * self.spec.success_tol:
            goal = rng.uniform(-self.goal_range, self.goal_range, self.n)
        self._goal = goal

    def _transition(self, action):
        self._pos = np.clip(self._pos + self.dt * action, -1.0, 1.0)

    def _observe(self):
        return GoalObservation(self._pos.copy(), self._pos.copy(), self._goal.copy())


class PushBox(GoalEnv):
    """Point agent pushing a square box (half-width ``box_half``) on ``[-1, 1]²``."""

    name = "push_box"
    dt = 0.1
    box_half = 0.1

    def __init__(self, horizon: int = 60, tol: float = 0.05,
                 goal_min_dist: float = 0.15, goal_max_dist: float = 0.5):
        super().__init__()
        self.goal_min_dist = goal_min_dist
        self.goal_max_dist = goal_max_dist
        self.spec = EnvSpec(6, 2, 2, -np.ones(2), np.ones(2), horizon, tol)
        self._agent = np.zeros(2)
        self._box = np.zeros(2)

    @property
    def box_limit(self) -> float:
        return 1.0 - self.box_half

    def _reset_state(self, rng):
        lim = self.box_limit - 0.1
        self._box = rng.uniform(-lim, lim, 2)
        while True:
            radius = rng.uniform(self.goal_min_dist, self.goal_max_dist)
            angle = rng.uniform(0.0, 2 * np.pi)
            goal = self._box + radius * np.array([np.cos(angle), np.sin(angle)])
            if np.all(np.abs(goal) <= lim):
                break
        self._goal = goal
        while True:
            agent = self._box + rng.uniform(-0.4, 0.4, 2)
            if np.max(np.abs(agent - self._box)) > self.box_half + 0.02 and np.all(np.abs(agent) <= 1.0):
                break
        self._agent = agent

    def _transition(self, action):
        h = self.box_half
        new = np.clip(self._agent + self.dt * action, -1.0, 1.0)
        offset = new - self._box
        depth = h - np.abs(offset)
        if np.all(depth > 0):
            # Push along the axis of least penetration: that is the face entered.
            axis = int(np.argmin(depth))
            direction = -np.sign(offset[axis]) or 1.0
            box = self._box.copy()
            box[axis] += direction * depth[axis]
            box = np.clip(box, -self.box_limit, self.box_limit)
            self._box = box
            if np.max(np.abs(new - box)) < h:
                new[axis] = box[axis] - direction * h
        self._agent = new

    def _observe(self):
        obs = np.concatenate([self._agent, self._box, self._box - self._agent])
        return GoalObservation(obs, self._box.copy(), self._goal.copy())


class BitFlip(GoalEnv):
    name = "bit_flip"

    def __init__(self, n: int = 10, horizon: int | None = None):
        super().__init__()
        if n < 1:
            raise ConfigError("bit_flip needs n >= 1")
        self.n = n
        self.spec = EnvSpec(n, n, n, -np.ones(n), np.ones(n), horizon or n, 0.5)
        self._bits = np.zeros(n)

    def _reset_state(self, rng):
        self._bits = rng.integers(0, 2, self.n).astype(np.float64)
        goal = rng.integers(0, 2, self.n).astype(np.float64)
        while np.array_equal(goal, self._bits):
            goal = rng.integers(0, 2, self.n).astype(np.float64)
        self._goal = goal

    def _transition(self, action):
        i = int(np.argmax(action))
        self._bits[i] = 1.0 - self._bits[i]

    def _observe(self):
        return GoalObservation(self._bits.copy(), self._bits.copy(), self._goal.copy())


ENVIRONMENTS = {"point_reach": PointReach, "push_box": PushBox, "bit_flip": BitFlip}


def make_env(name: str, **params) -> GoalEnv:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
