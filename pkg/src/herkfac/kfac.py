"""Kronecker-factored approximate natural gradient, plus an Adam baseline.

For a dense layer with packed parameters ``Wbar = [W | b]`` the Fisher block
is approximated as ``A ⊗ G`` with ``A = E[a aᵀ]`` (inputs with a bias
coordinate) and ``G = E[g gᵀ]`` (pre-activation gradients under a sampled
loss).  With factored Tikhonov damping the block stays factor-wise
invertible, and the preconditioned gradient is ``G⁻¹ · ∇Wbar · A⁻¹``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import CurvatureError, NumericError, ShapeError, StateError
from .nn import ForwardCache, LayerGrad, LayerStats, Mlp, backward, forward

_TRACE_FLOOR = 1e-12


@dataclass
class KfacConfig:
    damping: float = 0.8
    momentum: float = 0.8
    stat_decay: float = 0.95
    learning_rate: float = 1e-3
    inversion_interval: int = 20
    fisher_noise_std: float = 1.0
    max_update_norm: float | None = 10.0

    def __post_init__(self):
        if not self.damping > 0:
            raise ValueError("damping must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.stat_decay < 1.0:
            raise ValueError("stat_decay must lie in (0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.inversion_interval < 1:
            raise ValueError("inversion_interval must be >= 1")
        if not self.fisher_noise_std > 0:
            raise ValueError("fisher_noise_std must be positive")
        if self.max_update_norm is not None and not self.max_update_norm > 0:
            raise ValueError("max_update_norm must be positive or None")


@dataclass
class KfacLayerState:
    act_factor: np.ndarray
    grad_factor: np.ndarray
    momentum_buf: np.ndarray
    inv_act: np.ndarray | None = None
    inv_grad: np.ndarray | None = None
    step_count: int = 0

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int) -> "KfacLayerState":
        return cls(
            act_factor=np.zeros((in_dim + 1, in_dim + 1)),
            grad_factor=np.zeros((out_dim, out_dim)),
            momentum_buf=np.zeros((out_dim, in_dim + 1)),
        )


def init_states(net: Mlp) -> list[KfacLayerState]:
    return [KfacLayerState.zeros(l.in_dim, l.out_dim) for l in net.layers]


def sample_fisher_stats(net: Mlp, input, noise_seed, noise_std: float,
                        cache: ForwardCache | None = None) -> list[LayerStats]:
    """Layer statistics under targets drawn from the model's own output.

    Targets are ``y = output + N(0, noise_std²)``; the gradient of
    ``½‖output − y‖²`` with respect to the output is minus the noise, which is
    back-propagated in place of the data loss.  A precomputed forward ``cache``
    for the same input may be passed to skip the forward pass.
    """
    if cache is None:
        _, cache = forward(net, input)
    elif cache.acts[0].shape[0] != np.atleast_2d(input).shape[0]:
        raise ShapeError("cache batch does not match input")
    rng = noise_seed if isinstance(noise_seed, np.random.Generator) else np.random.default_rng(noise_seed)
    out_shape = cache.pre[-1].shape
    noise = rng.standard_normal(out_shape) * noise_std
    _, stats = backward(net, cache, -noise)
    return stats


def update_factors(state: KfacLayerState, stats: LayerStats, rho: float) -> KfacLayerState:
    a, g = stats.act, stats.grad
    if a.shape[1] != state.act_factor.shape[0] or g.shape[1] != state.grad_factor.shape[0]:
        raise ShapeError(
            f"stats ({a.shape[1]}, {g.shape[1]}) do not match factors "
            f"({state.act_factor.shape[0]}, {state.grad_factor.shape[0]})"
        )
    if a.shape[0] != g.shape[0]:
        raise ShapeError("act and grad stats have different batch sizes")
    batch = a.shape[0]
    aa = a.T @ a / batch
    gg = g.T @ g / batch
    state.act_factor = rho * state.act_factor + (1.0 - rho) * 0.5 * (aa + aa.T)
    state.grad_factor = rho * state.grad_factor + (1.0 - rho) * 0.5 * (gg + gg.T)
    state.step_count += 1
    return state


def damping_split(act_factor: np.ndarray, grad_factor: np.ndarray) -> float:
    """Trace-ratio balance between the two factors (1 if either is degenerate)."""
    tr_a = np.trace(act_factor) / act_factor.shape[0]
    tr_g = np.trace(grad_factor) / grad_factor.shape[0]
    if tr_a <= _TRACE_FLOOR or tr_g <= _TRACE_FLOOR:
        return 1.0
    return float(np.sqrt(tr_a / tr_g))


def compute_damped_inverses(state: KfacLayerState, damping: float,
                            layer: int | None = None) -> KfacLayerState:
    if state.step_count < 1:
        raise StateError("factors have not been populated yet")
    pi = damping_split(state.act_factor, state.grad_factor)
    root = np.sqrt(damping)
    try:
        state.inv_act = linalg.sym_inverse(state.act_factor, pi * root)
        state.inv_grad = linalg.sym_inverse(state.grad_factor, root / pi)
    except CurvatureError as exc:
        raise CurvatureError(str(exc), layer=layer) from exc
    return state


def precondition(state: KfacLayerState, grad_wbar: np.ndarray) -> np.ndarray:
    if state.inv_act is None or state.inv_grad is None:
        raise StateError("damped inverses have not been computed")
    grad_wbar = np.asarray(grad_wbar, dtype=np.float64)
    if grad_wbar.shape != state.momentum_buf.shape:
        raise ShapeError(f"gradient shape {grad_wbar.shape} != {state.momentum_buf.shape}")
    return state.inv_grad @ grad_wbar @ state.inv_act


def _as_wbar(g) -> np.ndarray:
    return g.wbar if isinstance(g, LayerGrad) else np.asarray(g, dtype=np.float64)


def apply_step(net: Mlp, states: list[KfacLayerState], grads, cfg: KfacConfig):
    """Momentum natural-gradient step with a global update-norm cap.

    On non-finite input the net and the states are left untouched.
    """
    if len(states) != len(net.layers) or len(grads) != len(net.layers):
        raise StateError("need exactly one state and one gradient per layer")
    wbars = [_as_wbar(g) for g in grads]
    if not all(np.all(np.isfinite(w)) for w in wbars):
        raise NumericError("non-finite gradient; K-FAC step aborted")
    bufs = [cfg.momentum * st.momentum_buf + precondition(st, w) for st, w in zip(states, wbars)]
    deltas = [cfg.learning_rate * b for b in bufs]
    norm = np.sqrt(sum(float(np.sum(d * d)) for d in deltas))
    if not np.isfinite(norm):
        raise NumericError("non-finite K-FAC update; step aborted")
    if cfg.max_update_norm is not None and norm > cfg.max_update_norm:
        scale = cfg.max_update_norm / norm
        deltas = [d * scale for d in deltas]
    for layer, st, buf, d in zip(net.layers, states, bufs, deltas):
        layer.set_wbar(layer.wbar - d)
        st.momentum_buf = buf
    return net, states


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    @classmethod
    def for_net(cls, net: Mlp) -> "AdamState":
        shapes = [(l.out_dim, l.in_dim + 1) for l in net.layers]
        return cls([np.zeros(s) for s in shapes], [np.zeros(s) for s in shapes])


def adam_step(net: Mlp, state: AdamState, grads, lr: float):
    wbars = [_as_wbar(g) for g in grads]
    if len(wbars) != len(state.m) or any(w.shape != m.shape for w, m in zip(wbars, state.m)):
        raise ShapeError("gradient shapes do not match the Adam state")
    if not all(np.all(np.isfinite(w)) for w in wbars):
        raise NumericError("non-finite gradient; Adam step aborted")
    t = state.step_count + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for i, (layer, g) in enumerate(zip(net.layers, wbars)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        step = lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
        layer.set_wbar(layer.wbar - step)
    state.step_count = t
    return net, state


class KfacOptimizer:
    """Per-network K-FAC driver: refresh factors, invert on schedule, step."""

    needs_curvature = True

    def __init__(self, net: Mlp, cfg: KfacConfig):
        self.cfg = cfg
        self.states = init_states(net)

    def step(self, net: Mlp, grads, stats: list[LayerStats]) -> None:
        if not all(np.all(np.isfinite(_as_wbar(g))) for g in grads):
            raise NumericError("non-finite gradient; K-FAC step aborted")
        for st, s in zip(self.states, stats):
            update_factors(st, s, self.cfg.stat_decay)
        for i, st in enumerate(self.states):
            if st.inv_act is None or (st.step_count - 1) % self.cfg.inversion_interval == 0:
                compute_damped_inverses(st, self.cfg.damping, layer=i)
        apply_step(net, self.states, grads, self.cfg)


class AdamOptimizer:
    needs_curvature = False

    def __init__(self, net: Mlp, lr: float = 1e-3):
        self.lr = lr
        self.state = AdamState.for_net(net)

    def step(self, net: Mlp, grads, stats=None) -> None:
        adam_step(net, self.state, grads, self.lr)
