"""Pure-numpy versions of the descent kernels.

Same contract as the compiled ``_kernels`` module: every function works on a
batch of rows, updates ``delta`` in place and clears ``alive[i]`` for rows
whose state went non-finite (those rows keep their last finite delta).
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


class PackedNet:
    __slots__ = ("weights", "biases", "relu")

    def __init__(self, weights, biases, relu):
        self.weights = weights
        self.biases = biases
        self.relu = relu


def pack(layers, activation: str) -> PackedNet:
    return PackedNet(
        [np.ascontiguousarray(W, dtype=np.float64) for W, _ in layers],
        [np.ascontiguousarray(b, dtype=np.float64) for _, b in layers],
        activation == "relu",
    )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _trace(net: PackedNet, X):
    acts = [X]
    a = X
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        if k == last:
            return acts, z[:, 0]
        a = np.maximum(z, 0.0) if net.relu else np.tanh(z)
        acts.append(a)


def _grad(net: PackedNet, acts, dz):
    g = dz[:, None]
    for k in range(len(net.weights) - 1, -1, -1):
        g = g @ net.weights[k]
        if k > 0:
            a = acts[k]
            g = g * (a > 0) if net.relu else g * (1.0 - a * a)
    return g


def logits(net: PackedNet, X) -> np.ndarray:
    return _trace(net, np.asarray(X, dtype=np.float64))[1]


def input_grads(net: PackedNet, X, y) -> np.ndarray:
    acts, z = _trace(net, np.asarray(X, dtype=np.float64))
    return _grad(net, acts, _sigmoid(z) - y)


def _steps(net, X, yref, delta, alive, step, steps, followup):
    rows = np.flatnonzero(alive)
    Xa, ya, d = X[rows], yref[rows].astype(np.float64), delta[rows]
    ok = np.ones(rows.size, dtype=bool)
    for _ in range(steps):
        if not ok.any():
            break
        acts, z = _trace(net, Xa + d)
        finite_z = np.isfinite(z)
        ok &= finite_z
        z = np.where(finite_z, z, 0.0)
        p = _sigmoid(z)
        g = _grad(net, acts, p - ya)
        if followup:
            new = d + step * g
        else:
            flipped = (p >= 0.5) != (ya == 1.0)
            new = np.where(flipped[:, None], d - step * np.sign(d), d + step * g)
        ok &= np.isfinite(new).all(axis=1)
        d = np.where(ok[:, None], new, d)
    delta[rows] = d
    alive[rows] = ok


def descend(net, X, yref, delta, alive, step: float, steps: int) -> None:
    """Main phase: per-step switch between the fool and reduce objectives."""
    _steps(net, X, yref, delta, alive, step, steps, followup=False)


def push(net, X, yref, delta, alive, step: float, steps: int) -> None:
    """Follow-up phase: pure fool-objective descent."""
    _steps(net, X, yref, delta, alive, step, steps, followup=True)
