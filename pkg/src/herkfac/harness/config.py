"""Flat ``dotted.key = value`` configuration files.

Sections map to dataclasses: ``train.*`` → :class:`TrainConfig` scalars,
``env.*`` → environment name and constructor parameters, ``agent.*`` →
:class:`AgentConfig`, ``kfac.*`` → :class:`KfacConfig`, ``replay.*`` →
:class:`ReplayConfig`.  Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..agents import AgentConfig
from ..envs import ENVIRONMENTS
from ..errors import ConfigError
from ..kfac import KfacConfig

_ENV_PARAMS = {
    "point_reach": {"n": int, "horizon": int, "tol": float, "start_range": float, "goal_range": float},
    "push_box": {"horizon": int, "tol": float, "goal_min_dist": float, "goal_max_dist": float},
    "bit_flip": {"n": int, "horizon": int},
}


@dataclass
class ReplayConfig:
    capacity: int = 10_000
    strategy: str = "future"
    relabel_mode: str = "sample"
    future_k: int = 4
    her: bool = True


@dataclass
class EnvConfig:
    name: str = "point_reach"
    params: dict = field(default_factory=dict)


@dataclass
class TrainConfig:
    epochs: int = 50
    cycles_per_epoch: int = 10
    episodes_per_cycle: int = 16
    optimizer_steps_per_cycle: int = 40
    eval_episodes: int = 50
    seed: int = 0
    out_dir: str = "runs/default"
    checkpoint_every: int = 10
    record_wall_time: bool = True
    stop_at_success: float | None = None
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    kfac: KfacConfig = field(default_factory=KfacConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)

    def validate(self) -> "TrainConfig":
        for name in ("epochs", "cycles_per_epoch", "episodes_per_cycle",
                     "optimizer_steps_per_cycle", "eval_episodes", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1")
        if self.env.name not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.env.name!r}")
        try:
            # dataclass validation lives in __post_init__
            AgentConfig(**dataclasses.asdict(self.agent))
            KfacConfig(**dataclasses.asdict(self.kfac))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        r = self.replay
        if r.capacity < 1 or r.future_k < 1:
            raise ConfigError("replay.capacity and replay.future_k must be >= 1")
        if r.strategy not in ("final", "future", "episode", "random"):
            raise ConfigError(f"unknown replay.strategy {r.strategy!r}")
        if r.relabel_mode not in ("sample", "insert"):
            raise ConfigError(f"unknown replay.relabel_mode {r.relabel_mode!r}")
        return self


_SECTIONS = {"agent": AgentConfig, "kfac": KfacConfig, "replay": ReplayConfig}
_TRAIN_SCALARS = {f.name for f in dataclasses.fields(TrainConfig)} - {"env", "agent", "kfac", "replay"}


def _parse_value(raw: str, typ, key: str):
    raw = raw.strip()
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin in (typing.Union, types.UnionType):
        if raw.lower() in ("none", "null", ""):
            return None
        typ = next(a for a in args if a is not type(None))
        origin, args = typing.get_origin(typ), typing.get_args(typ)
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is str:
            return raw
        if origin is tuple:
            return tuple(args[0](v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}") from None
    raise ConfigError(f"{key}: unsupported type {typ}")


def _field_types(cls) -> dict:
    return typing.get_type_hints(cls)


def set_key(cfg: TrainConfig, key: str, raw: str) -> None:
    """Apply one ``dotted.key = raw`` assignment to ``cfg`` in place."""
    section, _, name = key.partition(".")
    if not name:
        raise ConfigError(f"config key {key!r} needs a section prefix")
    if section == "train":
        if name not in _TRAIN_SCALARS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, name, _parse_value(raw, _field_types(TrainConfig)[name], key))
    elif section == "env":
        if name == "name":
            value = raw.strip()
            if value not in ENVIRONMENTS:
                raise ConfigError(f"unknown environment {value!r}")
            cfg.env.name = value
        else:
            allowed = _ENV_PARAMS[cfg.env.name]
            if name not in allowed:
                raise ConfigError(f"unknown config key {key!r} for environment {cfg.env.name}")
            cfg.env.params[name] = _parse_value(raw, allowed[name], key)
    elif section in _SECTIONS:
        types = _field_types(_SECTIONS[section])
        if name not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(getattr(cfg, section), name, _parse_value(raw, types[name], key))
    else:
        raise ConfigError(f"unknown config section {section!r} in key {key!r}")


def check_key(key: str, env_name: str = "point_reach") -> None:
    section, _, name = key.partition(".")
    known = (
        (section == "train" and name in _TRAIN_SCALARS)
        or (section == "env" and (name == "name" or name in _ENV_PARAMS.get(env_name, {})))
        or (section in _SECTIONS and name in _field_types(_SECTIONS[section]))
    )
    if not known:
        raise ConfigError(f"unknown config key {key!r}")


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    cfg = base if base is not None else TrainConfig()
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        entries.append((key.strip(), value.strip()))
    # env.name first so env parameters are checked against the right environment
    entries.sort(key=lambda kv: kv[0] != "env.name")
    for key, value in entries:
        set_key(cfg, key, value)
    return cfg.validate()


def load_config(path: str | Path) -> TrainConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def dump_config(cfg: TrainConfig) -> str:
    lines = [f"train.{name} = {_format(getattr(cfg, name))}"
             for name in sorted(_TRAIN_SCALARS)]
    lines.append(f"env.name = {cfg.env.name}")
    lines += [f"env.{k} = {_format(v)}" for k, v in sorted(cfg.env.params.items())]
    for section in ("agent", "kfac", "replay"):
        obj = getattr(cfg, section)
        lines += [f"{section}.{f.name} = {_format(getattr(obj, f.name))}"
                  for f in dataclasses.fields(obj)]
    return "\n".join(lines) + "\n"
