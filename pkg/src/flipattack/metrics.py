"""Competition score and per-round metric records.

score = FR * exp(-20 * D), where FR is the fraction of originally correct
rows that end up misclassified and D the mean L1 perturbation over those
fooled rows only.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructuralError, ValidationError
from .model import Model, predict

SCORE_RATE = 20.0
CSV_HEADER = ("round", "fooling_ratio", "mean_l1_fooled", "score", "n_fooled")


@dataclass(frozen=True)
class MetricsRecord:
    round: int
    fooling_ratio: float
    mean_l1_fooled: float | None  # None when nothing was fooled
    score: float
    n_fooled: int


def fooled_mask(model: Model, x, x_adv, y) -> np.ndarray:
    x, x_adv = np.asarray(x, float), np.asarray(x_adv, float)
    y = np.asarray(y).reshape(-1)
    if x.shape != x_adv.shape or x.shape[0] != y.shape[0]:
        raise StructuralError(f"shape mismatch: x {x.shape}, x_adv {x_adv.shape}, y {y.shape}")
    correct = predict(model, x) == y
    if not correct.any():
        raise ValidationError("model classifies nothing correctly")
    return correct & (predict(model, x_adv) != y)


def fooling_ratio(model: Model, x, x_adv, y) -> float:
    y = np.asarray(y).reshape(-1)
    mask = fooled_mask(model, x, x_adv, y)
    correct = predict(model, np.asarray(x, float)) == y
    return float(mask.sum() / correct.sum())


def mean_l1_fooled(x, x_adv, fooled) -> float | None:
    fooled = np.asarray(fooled, dtype=bool)
    n_f = int(fooled.sum())
    if n_f == 0:
        return None
    diff = np.asarray(x_adv, float)[fooled] - np.asarray(x, float)[fooled]
    return float(np.abs(diff).sum() / n_f)


def score(fr: float, d: float | None) -> float:
    if d is None:
        return 0.0
    return float(fr * math.exp(-SCORE_RATE * d))


def evaluate(model: Model, x, x_adv, y, round: int = 0) -> MetricsRecord:
    y = np.asarray(y).reshape(-1)
    x = np.asarray(x, float)
    correct = predict(model, x) == y
    mask = fooled_mask(model, x, x_adv, y)
    fr = float(mask.sum() / correct.sum())
    d = mean_l1_fooled(x, x_adv, mask)
    return MetricsRecord(round, fr, d, score(fr, d), int(mask.sum()))


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def format_summary(rec: MetricsRecord) -> str:
    d = "\u2014" if rec.mean_l1_fooled is None else f"{rec.mean_l1_fooled:.6g}"
    return f"FR={rec.fooling_ratio:.6g} D={d} S={rec.score:.6g}"


def emit_metrics_csv(history: list[MetricsRecord], path: str | Path) -> None:
    if not history:
        raise ValidationError("metrics history is empty")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in history:
                w.writerow([r.round, _fmt(r.fooling_ratio), _fmt(r.mean_l1_fooled),
                            _fmt(r.score), r.n_fooled])
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def load_metrics_csv(path: str | Path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise StructuralError(f"{path}: unexpected header {header}")
        out = []
        for lineno, row in enumerate(reader, start=1):
            try:
                rnd, fr, d, s, nf = row
                out.append(MetricsRecord(int(rnd), float(fr), float(d) if d else None,
                                         float(s), int(nf)))
            except ValueError as exc:
                raise StructuralError(f"{path}: row {lineno}: {exc}") from None
    return out
