import os

os.environ.setdefault("OMP_NUM_THREADS", "1")  # before numpy loads BLAS

import numpy as np
import pytest

from herkfac.nn import LayerSpec, forward, init_mlp


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spd(rng, n, floor=0.1):
    m = rng.standard_normal((n, n))
    return m @ m.T + floor * np.eye(n)


def small_net(seed=0, dims=(4, 6, 5, 3), acts=("tanh", "tanh", "identity")):
    spec = [LayerSpec(i, o, a) for i, o, a in zip(dims[:-1], dims[1:], acts)]
    net = init_mlp(spec, seed)
    # non-zero biases so the bias path is exercised
    r = np.random.default_rng(seed + 100)
    for layer in net.layers:
        layer.b[...] = 0.1 * r.standard_normal(layer.b.shape)
    return net


def fd_param_grads(net, x, out_weights, h=1e-5):
    """Central differences of mean_b <out_weights[b], net(x)[b]> w.r.t. every parameter."""

    def loss():
        out, _ = forward(net, x)
        return float(np.sum(out * out_weights) / x.shape[0])

    grads = []
    for layer in net.layers:
        gW = np.zeros_like(layer.W)
        gb = np.zeros_like(layer.b)
        for arr, g in ((layer.W, gW), (layer.b, gb)):
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = loss()
                arr[idx] = old - h
                down = loss()
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
        grads.append((gW, gb))
    return grads


def fd_input_grads(net, x, out_weights, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        b = idx[0]
        up = float(np.sum(forward(net, xp)[0][b] * out_weights[b]))
        down = float(np.sum(forward(net, xm)[0][b] * out_weights[b]))
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8))


CRITERIA: dict[int, tuple[bool, str]] = {}


def report(number: int, name: str, passed: bool, detail: str = "") -> None:
    """Record one acceptance-criterion verdict; all verdicts are printed at the end."""
    line = f"criterion {number} ({name}): {'PASS' if passed else 'FAIL'}"
    CRITERIA[number] = (passed, line + (f"  [{detail}]" if detail else ""))
    print(CRITERIA[number][1])


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number][1])
