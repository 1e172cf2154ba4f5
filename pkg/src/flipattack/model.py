"""Dense feedforward binary classifier: forward pass, input gradients, training.

The model is a stack of dense layers with a single sigmoid output unit.
Everything is float64. Weight matrices are stored ``(out_dim, in_dim)``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import StructuralError, SurrogateNotCleanError, ValidationError

if TYPE_CHECKING:
    from .data import Dataset

log = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh")
BCE_EPS = 1e-12
DEFAULT_HIDDEN = (64, 32, 8)


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = DEFAULT_HIDDEN
    hidden_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValidationError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValidationError(f"hidden dims must be >= 1, got {self.hidden_dims}")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.hidden_activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, 1)


@dataclass(frozen=True)
class Model:
    """Immutable dense network. ``layers[k] = (W, b)`` with ``W.shape == (out, in)``."""

    spec: ModelSpec
    layers: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)

    def __post_init__(self):
        frozen = []
        dims = self.spec.layer_dims
        if len(self.layers) != len(dims) - 1:
            raise StructuralError(
                f"expected {len(dims) - 1} layers for dims {dims}, got {len(self.layers)}"
            )
        for k, (W, b) in enumerate(self.layers):
            W = np.array(W, dtype=np.float64, copy=True)
            b = np.array(b, dtype=np.float64, copy=True).reshape(-1)
            if W.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise StructuralError(
                    f"layer {k}: weights {W.shape} / bias {b.shape} do not chain "
                    f"({dims[k + 1]}, {dims[k]})"
                )
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {k} has non-finite parameters")
            W.setflags(write=False)
            b.setflags(write=False)
            frozen.append((W, b))
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "Model":
        dims = spec.layer_dims
        return cls(spec, tuple((np.zeros((o, i)), np.zeros(o)) for i, o in zip(dims, dims[1:])))

    @classmethod
    def random(cls, spec: ModelSpec, rng: np.random.Generator, scale: float | None = None) -> "Model":
        """He/Glorot-style random initialisation (``scale`` overrides the std)."""
        dims = spec.layer_dims
        layers = []
        for i, o in zip(dims, dims[1:]):
            if scale is not None:
                std = scale
            elif spec.hidden_activation == "relu":
                std = np.sqrt(2.0 / i)
            else:
                std = np.sqrt(1.0 / i)
            layers.append((rng.normal(0.0, std, size=(o, i)), np.zeros(o)))
        return cls(spec, tuple(layers))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.spec.input_dim,
            "hidden_dims": list(self.spec.hidden_dims),
            "hidden_activation": self.spec.hidden_activation,
            "layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in self.layers],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Model":
        try:
            spec = ModelSpec(
                input_dim=int(doc["input_dim"]),
                hidden_dims=tuple(doc["hidden_dims"]),
                hidden_activation=doc["hidden_activation"],
            )
            layers = tuple((np.asarray(l["weights"], float), np.asarray(l["bias"], float))
                           for l in doc["layers"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"malformed model document: {exc}") from exc
        return cls(spec, layers)

    def save(self, path: str | Path) -> None:
        # json writes floats with repr(), which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise StructuralError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(doc)


def sigmoid(z):
    """Numerically stable logistic function (elementwise)."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_input(model: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.input_dim:
        raise StructuralError(f"input shape {x.shape} does not match input_dim {model.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite values")
    return x


def _hidden(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else np.tanh(z)


def _forward_trace(model: Model, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Return hidden activations (input first) and output logits for a batch."""
    acts = [x]
    a = x
    last = len(model.layers) - 1
    for k, (W, b) in enumerate(model.layers):
        z = a @ W.T + b
        if k == last:
            return acts, z[:, 0]
        a = _hidden(z, model.spec.hidden_activation)
        acts.append(a)
    raise AssertionError("unreachable")


def logits(model: Model, x) -> np.ndarray | float:
    x = _check_input(model, x)
    single = x.ndim == 1
    _, z = _forward_trace(model, np.atleast_2d(x))
    return float(z[0]) if single else z


def forward(model: Model, x) -> np.ndarray | float:
    """Output probability for a vector (float) or for each row of a matrix."""
    x = _check_input(model, x)
    single = x.ndim == 1
    _, z = _forward_trace(model, np.atleast_2d(x))
    p = sigmoid(z)
    return float(p[0]) if single else p


def predict(model: Model, x) -> np.ndarray | int:
    """Hard label: 1 when the probability is >= 0.5."""
    p = forward(model, x)
    if np.ndim(p) == 0:
        return int(p >= 0.5)
    return (p >= 0.5).astype(np.int64)


def bce(p, y):
    """Binary cross-entropy with the probability clamped to [eps, 1 - eps]."""
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(y, dtype=np.float64)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def _backprop(model: Model, acts: list[np.ndarray], dz: np.ndarray) -> np.ndarray:
    g = dz[:, None]
    for k in range(len(model.layers) - 1, -1, -1):
        g = g @ model.layers[k][0]
        if k > 0:
            a = acts[k]
            if model.spec.hidden_activation == "relu":
                g = g * (a > 0)
            else:
                g = g * (1.0 - a * a)
    return g


def input_gradient(model: Model, x, y) -> np.ndarray:
    """Gradient of ``bce(forward(model, x), y)`` with respect to ``x``.

    Accepts a single vector with a scalar label, or a matrix with a label
    vector (one gradient row per input row).
    """
    x = _check_input(model, x)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    acts, z = _forward_trace(model, X)
    dz = sigmoid(z) - np.asarray(y, dtype=np.float64).reshape(-1)
    g = _backprop(model, acts, dz)
    return g[0] if single else g


def finite_diff_gradient(model: Model, x, y, h: float = 1e-4) -> np.ndarray:
    """Central-difference estimate of :func:`input_gradient` for one vector."""
    x = _check_input(model, x)
    if x.ndim != 1:
        raise StructuralError("finite_diff_gradient takes a single input vector")
    d = x.shape[0]
    steps = np.eye(d) * h
    up = bce(forward(model, x + steps), y)
    down = bce(forward(model, x - steps), y)
    return (up - down) / (2.0 * h)


def accuracy(model: Model, X, y) -> float:
    return float(np.mean(predict(model, X) == np.asarray(y)))


def train_surrogate(
    data: "Dataset",
    spec: ModelSpec | None = None,
    epochs: int = 200,
    lr: float = 0.05,
    seed: int = 0,
    batch_size: int = 32,
) -> Model:
    """Fit a stand-in classifier with minibatch SGD on mean BCE.

    Features are standardised per column during training and the affine map
    is folded back into the first layer, so the returned model consumes raw
    features. Raises :class:`SurrogateNotCleanError` (carrying the model) if
    the final training accuracy is below 1.
    """
    X = data.features
    y = data.labels.astype(np.float64)
    if spec is None:
        spec = ModelSpec(input_dim=X.shape[1])
    if spec.input_dim != X.shape[1]:
        raise StructuralError(f"spec input_dim {spec.input_dim} != feature dim {X.shape[1]}")
    if np.unique(y).size < 2:
        raise ValidationError("labels contain one class")
    if epochs < 1 or lr <= 0:
        raise ValidationError("epochs and lr must be positive")

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Xs = (X - mu) / sd

    rng = np.random.default_rng(seed)
    init = Model.random(spec, rng)
    Ws = [W.copy() for W, _ in init.layers]
    bs = [b.copy() for _, b in init.layers]
    act = spec.hidden_activation
    n = Xs.shape[0]

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            a = Xs[idx]
            acts = [a]
            for k in range(len(Ws)):
                z = a @ Ws[k].T + bs[k]
                a = z if k == len(Ws) - 1 else _hidden(z, act)
                acts.append(a)
            g = (sigmoid(acts[-1][:, 0]) - y[idx])[:, None] / len(idx)
            for k in range(len(Ws) - 1, -1, -1):
                gW = g.T @ acts[k]
                gb = g.sum(axis=0)
                if k > 0:
                    g = g @ Ws[k]
                    g = g * (acts[k] > 0) if act == "relu" else g * (1.0 - acts[k] ** 2)
                Ws[k] -= lr * gW
                bs[k] -= lr * gb

    # fold standardisation: W0 (x - mu) / sd + b0 == (W0 / sd) x + (b0 - (W0 / sd) mu)
    W0 = Ws[0] / sd
    bs[0] = bs[0] - W0 @ mu
    Ws[0] = W0
    model = Model(spec, tuple(zip(Ws, bs)))
    acc = accuracy(model, X, y)
    log.info("surrogate trained: %d epochs, train accuracy %.4f", epochs, acc)
    if acc < 1.0:
        raise SurrogateNotCleanError(acc, model)
    return model
