"""Dense multilayer perceptrons with hand-written backpropagation.

Backward passes also return, per layer, the inputs (with a trailing constant
``1`` column for the bias) and the per-example pre-activation gradients.
These are the statistics K-FAC needs to build its Kronecker factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, StateError

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")


@dataclass
class Dense:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def wbar(self) -> np.ndarray:
        """Weights and bias packed as one ``(out, in + 1)`` matrix."""
        return np.concatenate([self.W, self.b[:, None]], axis=1)

    def set_wbar(self, wbar: np.ndarray) -> None:
        self.W[...] = wbar[:, :-1]
        self.b[...] = wbar[:, -1]


@dataclass
class Mlp:
    layers: list[Dense]

    @property
    def spec(self) -> list[LayerSpec]:
        return [LayerSpec(l.in_dim, l.out_dim, l.activation) for l in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def num_params(self) -> int:
        return sum(l.W.size + l.b.size for l in self.layers)

    def copy(self) -> "Mlp":
        return Mlp([Dense(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(l.W)) and np.all(np.isfinite(l.b)) for l in self.layers)

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class ForwardCache:
    acts: list[np.ndarray] = field(default_factory=list)  # (batch, in + 1), bias column last
    pre: list[np.ndarray] = field(default_factory=list)  # (batch, out)


@dataclass
class LayerStats:
    act: np.ndarray  # (batch, in + 1)
    grad: np.ndarray  # (batch, out), per-example dL/ds


@dataclass
class LayerGrad:
    W: np.ndarray
    b: np.ndarray

    @property
    def wbar(self) -> np.ndarray:
        return np.concatenate([self.W, self.b[:, None]], axis=1)


def mlp_spec(in_dim: int, hidden: list[int] | tuple[int, ...], out_dim: int,
             out_activation: str, hidden_activation: str = "relu") -> list[LayerSpec]:
    dims = [in_dim, *hidden, out_dim]
    acts = [hidden_activation] * len(hidden) + [out_activation]
    return [LayerSpec(i, o, a) for i, o, a in zip(dims[:-1], dims[1:], acts)]


def init_mlp(spec: list[LayerSpec], seed: int) -> Mlp:
    """Weights ~ U(-1/sqrt(in), 1/sqrt(in)), biases zero."""
    if not spec:
        raise ShapeError("an MLP needs at least one layer")
    for prev, nxt in zip(spec[:-1], spec[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}")
    rng = np.random.default_rng(seed)
    layers = []
    for ls in spec:
        bound = 1.0 / np.sqrt(ls.in_dim)
        W = rng.uniform(-bound, bound, size=(ls.out_dim, ls.in_dim))
        layers.append(Dense(W, np.zeros(ls.out_dim), ls.activation))
    return Mlp(layers)


def _activate(s: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(s, 0.0)
    if kind == "tanh":
        return np.tanh(s)
    return s


def _activation_grad(s: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (s > 0.0).astype(s.dtype)
    if kind == "tanh":
        t = np.tanh(s)
        return 1.0 - t * t
    return np.ones_like(s)


def forward(net: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    h = np.asarray(x, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    if h.ndim != 2 or h.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {h.shape} does not match in_dim {net.in_dim}")
    cache = ForwardCache()
    ones = np.ones((h.shape[0], 1))
    for layer in net.layers:
        cache.acts.append(np.concatenate([h, ones], axis=1))
        s = h @ layer.W.T + layer.b
        cache.pre.append(s)
        h = _activate(s, layer.activation)
    return h, cache


def _backprop(net: Mlp, cache: ForwardCache, output_grad, want_params: bool):
    if len(cache.acts) != len(net.layers) or len(cache.pre) != len(net.layers):
        raise StateError("forward cache does not match the network's layer count")
    delta = np.asarray(output_grad, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[:, None] if net.out_dim == 1 else delta[None, :]
    if delta.shape != cache.pre[-1].shape:
        raise ShapeError(f"output_grad shape {delta.shape} != output shape {cache.pre[-1].shape}")
    batch = delta.shape[0]
    grads: list[LayerGrad] = []
    stats: list[LayerStats] = []
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        g = delta * _activation_grad(cache.pre[i], layer.activation)
        if want_params:
            a = cache.acts[i]
            gw = g.T @ a / batch
            grads.append(LayerGrad(gw[:, :-1].copy(), gw[:, -1].copy()))
            stats.append(LayerStats(a, g))
        delta = g @ layer.W
    grads.reverse()
    stats.reverse()
    return grads, stats, delta


def backward(net: Mlp, cache: ForwardCache, output_grad) -> tuple[list[LayerGrad], list[LayerStats]]:
    """Gradients of ``L = mean_b <output_grad[b], output[b]>`` w.r.t. every parameter.

    ``stats[l].grad`` holds the per-example (not batch-averaged) gradients
    with respect to layer ``l``'s pre-activations, so that
    ``grads[l].wbar == stats[l].grad.T @ stats[l].act / batch``.
    """
    grads, stats, _ = _backprop(net, cache, output_grad, want_params=True)
    return grads, stats


def grad_through_input(net: Mlp, cache: ForwardCache, output_grad) -> np.ndarray:
    """Per-example gradient of ``<output_grad[b], output[b]>`` w.r.t. input row ``b``.

    Unlike :func:`backward` the result is not divided by the batch size; each
    row only depends on its own example.
    """
    _, _, dx = _backprop(net, cache, output_grad, want_params=False)
    return dx


def polyak_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.spec != online.spec:
        raise ShapeError("polyak_update needs identical architectures")
    for t, o in zip(target.layers, online.layers):
        t.W *= 1.0 - tau
        t.W += tau * o.W
        t.b *= 1.0 - tau
        t.b += tau * o.b
    return target
