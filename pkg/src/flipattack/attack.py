"""Per-sample gradient-descent attack with a piecewise fool/reduce objective.

While the prediction still matches the clean one, each step descends the
negative BCE (push the probability away from the clean label). Once the
prediction has flipped, the step descends the L1 norm of the perturbation
instead. A short follow-up phase of pure negative-BCE descent runs after
the main phase. Plain gradient descent throughout, no momentum.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import Dataset
from .errors import StructuralError, ValidationError
from .model import Model, bce, forward, input_gradient, predict

CORE_STEPS = 50_000
CORE_SEGMENT = 10_000


class Branch(str, enum.Enum):
    FOOL = "fool"
    REDUCE = "reduce"


@dataclass(frozen=True)
class GdConfig:
    """Step counts and sizes for one attack run.

    Zero steps or zero step sizes are accepted (they make the
    corresponding phase a no-op).
    """

    step_size: float = 1.0
    steps: int = 2500
    followup_steps: int = 250
    followup_step_size: float = 0.01

    def __post_init__(self):
        for name in ("step_size", "followup_step_size"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        for name in ("steps", "followup_steps"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    def scaled(self, factor: float) -> "GdConfig":
        """Same schedule with both step sizes multiplied by ``factor``."""
        return replace(self, step_size=self.step_size * factor,
                       followup_step_size=self.followup_step_size * factor)


@dataclass(frozen=True)
class AttackCandidate:
    delta: np.ndarray
    flipped: bool
    l1: float = field(init=False)

    def __post_init__(self):
        d = np.array(self.delta, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "flipped", bool(self.flipped))
        object.__setattr__(self, "l1", float(np.abs(d).sum()))


@dataclass
class CandidateBatch:
    """One run's candidates for every row of a matrix.

    ``delta`` is recomputed as ``x_adv - x`` so that ``l1`` matches the
    distance an evaluator measures on the stored adversarial inputs.
    """

    x_adv: np.ndarray
    delta: np.ndarray
    flipped: np.ndarray
    l1: np.ndarray
    run: int = 0

    def __len__(self) -> int:
        return self.x_adv.shape[0]

    def candidate(self, i: int) -> AttackCandidate:
        return AttackCandidate(self.delta[i], bool(self.flipped[i]))

    def candidates(self) -> list[AttackCandidate]:
        return [self.candidate(i) for i in range(len(self))]


def _as_batch(model: Model, x, delta=None):
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise StructuralError(f"inputs of shape {np.shape(x)} do not match input_dim {model.input_dim}")
    if delta is None:
        return X, None
    D = np.array(delta, dtype=np.float64).reshape(X.shape) if np.size(delta) == X.size else None
    if D is None:
        raise StructuralError(f"perturbation shape {np.shape(delta)} does not match inputs {X.shape}")
    return X, D


def make_batch(model: Model, X: np.ndarray, y_ref: np.ndarray, delta: np.ndarray, run: int = 0) -> CandidateBatch:
    """Build candidates from final perturbations, recomputing flips and L1 costs."""
    x_adv = X + delta
    finite = np.all(np.isfinite(x_adv), axis=1)
    x_adv[~finite] = X[~finite]
    eff = x_adv - X
    flipped = predict(model, x_adv) != y_ref
    flipped &= finite
    l1 = np.abs(eff).sum(axis=1)
    l1[~finite] = np.inf
    return CandidateBatch(x_adv, eff, flipped, l1, run)


def piecewise_loss(model: Model, x, delta, y_ref: int) -> tuple[float, Branch]:
    """Objective value and active branch for one sample."""
    x, delta = np.asarray(x, float), np.asarray(delta, float)
    if x.shape != delta.shape:
        raise StructuralError(f"x {x.shape} and delta {delta.shape} differ in shape")
    p = forward(model, x + delta)
    if int(p >= 0.5) == y_ref:
        return -bce(p, y_ref), Branch.FOOL
    return float(np.abs(delta).sum()), Branch.REDUCE


def loss_subgradient(model: Model, x, delta, y_ref: int) -> np.ndarray:
    """Gradient of :func:`piecewise_loss` with respect to ``delta`` (sign(0) = 0)."""
    _, branch = piecewise_loss(model, x, delta, y_ref)
    delta = np.asarray(delta, float)
    if branch is Branch.REDUCE:
        return np.sign(delta)
    return -input_gradient(model, np.asarray(x, float) + delta, y_ref)


def gd_attack_batch(model: Model, X, y_ref, delta0, cfg: GdConfig, run: int = 0,
                    backend: str | None = None) -> CandidateBatch:
    """Attack every row of ``X`` independently; one shared step configuration."""
    X, D = _as_batch(model, X, delta0)
    y_ref = np.asarray(y_ref, dtype=np.int64).reshape(-1)
    impl = kernels.get_backend(backend)
    net = kernels.pack(model, backend)
    D = np.ascontiguousarray(D)
    alive = np.ones(X.shape[0], dtype=bool)
    if cfg.steps:
        impl.descend(net, X, y_ref, D, alive, cfg.step_size, cfg.steps)
    if cfg.followup_steps:
        impl.push(net, X, y_ref, D, alive, cfg.followup_step_size, cfg.followup_steps)
    return make_batch(model, X, y_ref, D, run)


def gd_attack(model: Model, x, y_ref: int, delta0, cfg: GdConfig,
              backend: str | None = None) -> AttackCandidate:
    return gd_attack_batch(model, x, [y_ref], delta0, cfg, backend=backend).candidate(0)


def follow_up(model: Model, x, y_ref: int, delta, cfg: GdConfig, backend: str | None = None) -> np.ndarray:
    """Pure fool-objective descent for ``cfg.followup_steps`` steps, flip status ignored."""
    X, D = _as_batch(model, x, delta)
    impl = kernels.get_backend(backend)
    D = np.ascontiguousarray(D)
    impl.push(kernels.pack(model, backend), X, np.array([y_ref], dtype=np.int64), D,
              np.ones(1, dtype=bool), cfg.followup_step_size, cfg.followup_steps)
    return D[0]


def core_step_size(t: int) -> float:
    """Baseline schedule: 0.01 for the first 10k steps, then x10 every 10k steps."""
    if not 0 <= t < CORE_STEPS:
        raise ValidationError(f"step index {t} outside [0, {CORE_STEPS})")
    return 10.0 ** (t // CORE_SEGMENT - 2)


def core_baseline_batch(model: Model, data: Dataset, gd: GdConfig = GdConfig(),
                        step_scale: float = 1.0, backend: str | None = None) -> CandidateBatch:
    """Single long run from the clean data with the increasing step ladder."""
    X = data.features
    y_ref = predict(model, X)
    impl = kernels.get_backend(backend)
    net = kernels.pack(model, backend)
    D = np.zeros_like(X)
    alive = np.ones(X.shape[0], dtype=bool)
    for seg in range(CORE_STEPS // CORE_SEGMENT):
        impl.descend(net, X, y_ref, D, alive, core_step_size(seg * CORE_SEGMENT) * step_scale,
                     CORE_SEGMENT)
    if gd.followup_steps:
        impl.push(net, X, y_ref, D, alive, gd.followup_step_size * step_scale, gd.followup_steps)
    return make_batch(model, X, y_ref, D)


def core_baseline(model: Model, data: Dataset, seed: int = 0, gd: GdConfig = GdConfig(),
                  step_scale: float = 1.0, backend: str | None = None) -> list[AttackCandidate]:
    # deterministic: starts from zero perturbation, no random draws (seed kept for API symmetry)
    del seed
    return core_baseline_batch(model, data, gd, step_scale, backend).candidates()
