"""Tabular datasets: CSV loading/saving and the synthetic two-cluster generator."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StructuralError, ValidationError

DEFAULT_DIM = 87


def _fmt(v: float) -> str:
    # 17 significant digits always round-trip a float64
    return format(float(v), ".17g")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise StructuralError(f"features must be a non-empty N x d matrix, got {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise StructuralError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValidationError("labels must be 0 or 1")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def has_both_labels(self) -> bool:
        return bool(np.any(self.labels == 0) and np.any(self.labels == 1))


def _parse_rows(path: Path, with_label: bool):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise StructuralError(f"{path}: empty file")
        width = len(header)
        if with_label and (width < 2 or header[-1].strip() != "label"):
            raise StructuralError(f"{path}: last header column must be 'label'")
        rows = []
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != width:
                raise StructuralError(
                    f"{path}: row {lineno} has {len(row)} fields, header has {width}"
                )
            values = []
            for col, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(
                        f"{path}: row {lineno}, column {header[col]!r}: cannot parse {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ValidationError(
                        f"{path}: row {lineno}, column {header[col]!r}: non-finite value {cell!r}"
                    )
                values.append(v)
            if with_label and values[-1] not in (0.0, 1.0):
                raise ValidationError(
                    f"{path}: row {lineno}: label {row[-1]!r} is not 0 or 1"
                )
            rows.append(values)
    if not rows:
        raise StructuralError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def load_dataset(path: str | Path) -> Dataset:
    """Read a ``f0,...,f{d-1},label`` CSV file."""
    arr = _parse_rows(Path(path), with_label=True)
    return Dataset(arr[:, :-1], arr[:, -1].astype(np.int64))


def load_matrix(path: str | Path) -> np.ndarray:
    """Read a label-free ``f0,...,f{d-1}`` CSV file (adversarial inputs)."""
    return _parse_rows(Path(path), with_label=False)


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def save_dataset(data: Dataset, path: str | Path) -> None:
    header = [f"f{k}" for k in range(data.dim)] + ["label"]
    rows = ([_fmt(v) for v in x] + [str(int(y))] for x, y in zip(data.features, data.labels))
    _write_csv(Path(path), header, rows)


def save_adversarial(x_adv, path: str | Path) -> None:
    X = np.asarray(x_adv, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise StructuralError(f"adversarial matrix must be non-empty 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("adversarial matrix contains non-finite values")
    header = [f"f{k}" for k in range(X.shape[1])]
    _write_csv(Path(path), header, ([_fmt(v) for v in row] for row in X))


def generate_synthetic(
    n: int,
    d: int = DEFAULT_DIM,
    margin: float = 1.0,
    noise: float = 0.3,
    seed: int = 0,
) -> Dataset:
    """Two Gaussian clusters centred at ``+margin*u`` (label 1) and ``-margin*u`` (label 0).

    ``u`` is a random unit vector; labels alternate so classes are balanced.
    """
    if n < 2 or d < 1:
        raise ValidationError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if margin <= 0 or noise < 0:
        raise ValidationError("margin must be > 0 and noise >= 0")
    rng = np.random.default_rng(seed)
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    labels = np.arange(n) % 2
    centres = np.where(labels[:, None] == 1, margin, -margin) * u
    X = centres + noise * rng.normal(size=(n, d))
    return Dataset(X, labels)
