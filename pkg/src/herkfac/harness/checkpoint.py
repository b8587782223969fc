"""Binary agent checkpoints.

Layout (all integers little-endian)::

    b"TDHK"                 magic
    u16                     format version (1)
    u16                     algorithm id (0 = ddpg, 1 = td3)
    u32 x 3                 obs_dim, goal_dim, action_dim
    f64 x action_dim x 2    action_low, action_high
    u16                     network count
    per network:
        u16 + utf-8         name
        u16                 layer count
        per layer: u32 in_dim, u32 out_dim, u8 activation id
    f64 ...                 parameters: networks in manifest order, layers in
                            order, weights (row-major) before biases

Optimizer state is not stored; a loaded agent starts with fresh optimizer
statistics.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..agents import AgentConfig, GoalAgent, make_agent
from ..envs import EnvSpec
from ..errors import CheckpointError
from ..kfac import KfacConfig
from ..nn import ACTIVATIONS

MAGIC = b"TDHK"
VERSION = 1
_ALGORITHMS = ("ddpg", "td3")


def encode_agent(agent: GoalAgent) -> bytes:
    spec = agent.env_spec
    parts = [MAGIC, struct.pack("<HH", VERSION, _ALGORITHMS.index(agent.cfg.algorithm)),
             struct.pack("<III", spec.obs_dim, spec.goal_dim, spec.action_dim),
             np.asarray(spec.action_low, dtype="<f8").tobytes(),
             np.asarray(spec.action_high, dtype="<f8").tobytes()]
    nets = agent.networks()
    parts.append(struct.pack("<H", len(nets)))
    for name, net in nets.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<H", len(net.layers)))
        for layer in net.layers:
            parts.append(struct.pack("<IIB", layer.in_dim, layer.out_dim,
                                     ACTIVATIONS.index(layer.activation)))
    for net in nets.values():
        for layer in net.layers:
            parts.append(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what}", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(np.float64)


def decode_agent(data: bytes, cfg: AgentConfig | None = None,
                 kfac_cfg: KfacConfig | None = None) -> GoalAgent:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint", 0)
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", 4)
    (algo_id,) = r.unpack("<H", "algorithm")
    if algo_id >= len(_ALGORITHMS):
        raise CheckpointError(f"unknown algorithm id {algo_id}", r.pos - 2)
    obs_dim, goal_dim, action_dim = r.unpack("<III", "env dims")
    low = r.floats(action_dim, "action_low")
    high = r.floats(action_dim, "action_high")

    (count,) = r.unpack("<H", "network count")
    manifest = []
    for _ in range(count):
        (nlen,) = r.unpack("<H", "network name length")
        at = r.pos
        try:
            name = r.take(nlen, "network name").decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("network name is not utf-8", at) from None
        (nlayers,) = r.unpack("<H", "layer count")
        layers = []
        for _ in range(nlayers):
            at = r.pos
            i, o, act = r.unpack("<IIB", "layer manifest")
            if act >= len(ACTIVATIONS):
                raise CheckpointError(f"unknown activation id {act}", at)
            layers.append((i, o, ACTIVATIONS[act]))
        manifest.append((name, layers))

    base = cfg or AgentConfig()
    hidden = tuple(o for _, o, _ in manifest[0][1][:-1])
    agent_cfg = AgentConfig(**{**base.__dict__, "algorithm": _ALGORITHMS[algo_id], "hidden": hidden})
    spec = EnvSpec(obs_dim, goal_dim, action_dim, low, high, horizon=1, success_tol=0.0)
    agent = make_agent(spec, agent_cfg, kfac_cfg)
    nets = agent.networks()
    if [n for n, _ in manifest] != list(nets):
        raise CheckpointError(f"network list {[n for n, _ in manifest]} does not match {agent_cfg.algorithm}")
    for name, layers in manifest:
        expected = [(l.in_dim, l.out_dim, l.activation) for l in nets[name].layers]
        if expected != layers:
            raise CheckpointError(f"architecture of {name} is inconsistent")
    for name, _ in manifest:
        for layer in nets[name].layers:
            layer.W[...] = r.floats(layer.W.size, f"{name} weights").reshape(layer.W.shape)
            layer.b[...] = r.floats(layer.b.size, f"{name} biases")
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after parameters", r.pos)
    return agent


def save_checkpoint(agent: GoalAgent, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_agent(agent))
    tmp.replace(path)


def load_checkpoint(path: str | Path, cfg: AgentConfig | None = None,
                    kfac_cfg: KfacConfig | None = None) -> GoalAgent:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from None
    return decode_agent(data, cfg, kfac_cfg)
