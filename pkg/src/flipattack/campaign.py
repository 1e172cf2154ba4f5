"""Multi-round, multi-start attack campaign.

Each round n launches ``runs_per_round`` attack runs. Run j starts from

* j = 1: the clean data,
* j = 2: the best adversarial inputs found so far,
* j = 3..10: a random point on the segment between clean and best rows,
* j >= 11: a random point on the segment between a clean row and a random
  clean row of the opposite label,

except that runs j >= 3 keep their own previous end state with probability
``1 - refresh_probability``. Each run draws its step size uniformly from
[max_n / 10, max_n) with max_n = 2 ** (9 - n / 5). After the round every row
keeps the flipped candidate with the smallest L1 distance seen so far.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .attack import CandidateBatch, GdConfig, gd_attack_batch
from .data import Dataset
from .errors import StructuralError, ValidationError
from .metrics import MetricsRecord, evaluate
from .model import Model, predict

log = logging.getLogger(__name__)

REDUCTIONS = ("mean", "sum")
MIX_BEST_LAST = 10  # runs 3..10 mix with the best state, 11.. with opposite-label rows


@dataclass(frozen=True)
class CampaignConfig:
    rounds: int = 150
    runs_per_round: int = 20
    gd: GdConfig = GdConfig()
    base_seed: int = 0
    refresh_probability: float = 0.5
    # "mean": sampled steps act on the objective averaged over all N*d entries of the
    # attacked matrix (step / (N*d) per sample); "sum": steps act on each sample's own objective
    reduction: str = "mean"
    workers: int = 1

    def __post_init__(self):
        if self.rounds < 0:
            raise ValidationError("rounds must be >= 0")
        if self.runs_per_round < 1:
            raise ValidationError("runs_per_round must be >= 1")
        if not 0.0 <= self.refresh_probability <= 1.0:
            raise ValidationError("refresh_probability must lie in [0, 1]")
        if self.reduction not in REDUCTIONS:
            raise ValidationError(f"reduction must be one of {REDUCTIONS}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def step_scale(self, n_rows: int, dim: int) -> float:
        return 1.0 / (n_rows * dim) if self.reduction == "mean" else 1.0


@dataclass
class CampaignState:
    round: int
    x_best: np.ndarray
    best_l1: np.ndarray
    best_flipped: np.ndarray
    carried: list[np.ndarray]
    history: list[MetricsRecord] = field(default_factory=list)

    @classmethod
    def initial(cls, data: Dataset, runs: int) -> "CampaignState":
        X = data.features
        n = X.shape[0]
        return cls(0, X.copy(), np.full(n, np.inf), np.zeros(n, dtype=bool),
                   [X.copy() for _ in range(runs)])

    def copy(self) -> "CampaignState":
        return CampaignState(self.round, self.x_best.copy(), self.best_l1.copy(),
                             self.best_flipped.copy(), [c.copy() for c in self.carried],
                             list(self.history))


def step_bounds(n: int) -> tuple[float, float]:
    """(min_n, max_n) of the step-size distribution for round ``n`` (1-based)."""
    if n < 1:
        raise ValidationError(f"round index must be >= 1, got {n}")
    hi = 2.0 ** (9.0 - n / 5.0)
    return hi / 10.0, hi


def sample_step(n: int, rng: np.random.Generator) -> float:
    lo, hi = step_bounds(n)
    return float(rng.uniform(lo, hi))


def mix_rows(x_a, x_b, rng: np.random.Generator | None = None, w=None) -> np.ndarray:
    """Convex combination ``x_a * w + x_b * (1 - w)`` with one ``w ~ U(0, 1)`` per row."""
    x_a, x_b = np.asarray(x_a, float), np.asarray(x_b, float)
    if x_a.shape != x_b.shape:
        raise StructuralError(f"cannot mix rows of shapes {x_a.shape} and {x_b.shape}")
    if w is None:
        w = rng.random() if x_a.ndim == 1 else rng.random(x_a.shape[0])
    w = np.asarray(w, float)
    if x_a.ndim == 2:
        w = w.reshape(-1, 1)
    return x_a * w + x_b * (1.0 - w)


def run_seed(base_seed: int, n: int, j: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, n, j])


def _opposite_pools(y: np.ndarray) -> dict[int, np.ndarray]:
    return {c: np.flatnonzero(y != c) for c in (0, 1)}


def _draw_partners(y: np.ndarray, rng: np.random.Generator, pools=None) -> np.ndarray:
    pools = pools or _opposite_pools(y)
    out = np.empty(y.shape[0], dtype=np.int64)
    picks = rng.random(y.shape[0])
    for c, pool in pools.items():
        rows = y == c
        if rows.any():
            if pool.size == 0:
                raise ValidationError(f"no sample with label != {c} to mix with")
            out[rows] = pool[np.minimum((picks[rows] * pool.size).astype(np.int64), pool.size - 1)]
    return out


def build_init(j: int, row: int, x, y, state: CampaignState, rng: np.random.Generator) -> np.ndarray:
    """Initial adversarial input of run ``j`` for one row."""
    x = np.asarray(x, float)
    y = np.asarray(y).reshape(-1)
    if j < 1:
        raise ValidationError("run index j is 1-based")
    if j == 1:
        return x[row].copy()
    if j == 2:
        return state.x_best[row].copy()
    if j <= MIX_BEST_LAST:
        return mix_rows(x[row], state.x_best[row], rng)
    k = _draw_partners(y[row:row + 1], rng, _opposite_pools(y))[0]
    return mix_rows(x[row], x[k], rng)


def build_inits(j: int, x: np.ndarray, y: np.ndarray, state: CampaignState,
                rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`build_init` over all rows (partners first, then weights)."""
    if j == 1:
        return x.copy()
    if j == 2:
        return state.x_best.copy()
    if j <= MIX_BEST_LAST:
        return mix_rows(x, state.x_best, rng)
    partners = _draw_partners(y, rng)
    return mix_rows(x, x[partners], rng)


def maybe_refresh(carried, fresh, rng: np.random.Generator, p_refresh: float):
    """Return ``fresh`` with probability ``p_refresh``, else ``carried``."""
    return fresh if rng.random() < p_refresh else carried


def reduce_best(state: CampaignState, batches: list[CandidateBatch]) -> CampaignState:
    """Keep, per row, the flipped candidate with the smallest L1 (incumbent wins ties)."""
    new = state.copy()
    for b in sorted(batches, key=lambda b: b.run):
        better = b.flipped & (b.l1 < new.best_l1)
        if better.any():
            new.x_best[better] = b.x_adv[better]
            new.best_l1[better] = b.l1[better]
            new.best_flipped[better] = True
    return new


def _run_one(model, data, y_ref, state, cfg, n, j, scale, backend) -> CandidateBatch:
    rng = np.random.default_rng(run_seed(cfg.base_seed, n, j))
    X = data.features
    step = sample_step(n, rng)
    init = build_inits(j, X, data.labels, state, rng)
    if j > 2:
        init = maybe_refresh(state.carried[j - 1], init, rng, cfg.refresh_probability)
    gd = replace(cfg.gd, step_size=step).scaled(scale)
    return gd_attack_batch(model, X, y_ref, init - X, gd, run=j, backend=backend)


def run_round(model: Model, data: Dataset, state: CampaignState, cfg: CampaignConfig,
              n: int | None = None, backend: str | None = None) -> CampaignState:
    n = state.round + 1 if n is None else n
    if n != state.round + 1:
        raise ValidationError(f"state is at round {state.round}, cannot run round {n}")
    if len(state.carried) != cfg.runs_per_round:
        raise StructuralError("carried states do not match runs_per_round")
    X = data.features
    y_ref = predict(model, X)
    scale = cfg.step_scale(*X.shape)
    runs = range(1, cfg.runs_per_round + 1)

    def job(j):
        return _run_one(model, data, y_ref, state, cfg, n, j, scale, backend)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            batches = list(pool.map(job, runs))
    else:
        batches = [job(j) for j in runs]

    new = reduce_best(state, batches)
    new.round = n
    new.carried = [b.x_adv for b in batches]
    new.history.append(evaluate(model, X, new.x_best, data.labels, round=n))
    return new


@dataclass
class CampaignResult:
    x_adv: np.ndarray
    metrics: list[MetricsRecord]
    state: CampaignState


def check_inputs(model: Model, data: Dataset, cfg: CampaignConfig) -> None:
    if data.dim != model.input_dim:
        raise StructuralError(f"data has {data.dim} features, model expects {model.input_dim}")
    if cfg.runs_per_round > MIX_BEST_LAST and not data.has_both_labels():
        raise ValidationError("opposite-label mixing needs both labels in the data")


def run_campaign(model: Model, data: Dataset, cfg: CampaignConfig,
                 state: CampaignState | None = None, checkpoint: str | Path | None = None,
                 on_round: Callable[[CampaignState], None] | None = None,
                 backend: str | None = None) -> CampaignResult:
    """Run rounds ``state.round + 1 .. cfg.rounds`` (all of them for a fresh state)."""
    check_inputs(model, data, cfg)
    state = state or CampaignState.initial(data, cfg.runs_per_round)
    while state.round < cfg.rounds:
        state = run_round(model, data, state, cfg, backend=backend)
        rec = state.history[-1]
        log.info("round %d: FR=%.4f D=%s S=%.6f", rec.round, rec.fooling_ratio,
                 rec.mean_l1_fooled, rec.score)
        if checkpoint is not None:
            save_checkpoint(state, cfg, checkpoint)
        if on_round is not None:
            on_round(state)
    return CampaignResult(state.x_best.copy(), list(state.history), state)


def save_checkpoint(state: CampaignState, cfg: CampaignConfig, path: str | Path) -> None:
    doc = {
        "round": state.round,
        "base_seed": cfg.base_seed,
        "runs_per_round": cfg.runs_per_round,
        "x_best": state.x_best.tolist(),
        "best_l1": [None if not np.isfinite(v) else float(v) for v in state.best_l1],
        "best_flipped": state.best_flipped.tolist(),
        "carried": [c.tolist() for c in state.carried],
        "history": [[r.round, r.fooling_ratio, r.mean_l1_fooled, r.score, r.n_fooled]
                    for r in state.history],
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[CampaignState, dict]:
    """Return the saved state plus its metadata (``base_seed``, ``runs_per_round``)."""
    try:
        doc = json.loads(Path(path).read_text())
        state = CampaignState(
            round=int(doc["round"]),
            x_best=np.asarray(doc["x_best"], dtype=np.float64),
            best_l1=np.array([np.inf if v is None else v for v in doc["best_l1"]], dtype=np.float64),
            best_flipped=np.asarray(doc["best_flipped"], dtype=bool),
            carried=[np.asarray(c, dtype=np.float64) for c in doc["carried"]],
            history=[MetricsRecord(int(r), fr, d, s, int(nf)) for r, fr, d, s, nf in doc["history"]],
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"cannot read checkpoint {path}: {exc}") from exc
    return state, {"base_seed": doc["base_seed"], "runs_per_round": doc["runs_per_round"]}
