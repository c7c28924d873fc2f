"""Numeric binary-classification datasets with min-max normalization."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Dataset:
    X: np.ndarray  # raw features, (m, d)
    y: np.ndarray  # labels in {0, 1}
    feature_names: list[str]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y).astype(int).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ValueError("X must be (m, d) with one label per row")
        if self.X.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @classmethod
    def from_arrays(cls, X, y, feature_names=None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        names = list(feature_names or [f"x{i}" for i in range(X.shape[1])])
        return cls(X, y, names, X.min(axis=0), X.max(axis=0))

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def normalize(self, X) -> np.ndarray:
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return (np.asarray(X, dtype=np.float64) - self.lo) / span

    def denormalize(self, Z) -> np.ndarray:
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return np.asarray(Z, dtype=np.float64) * span + self.lo

    @property
    def Xn(self) -> np.ndarray:
        return self.normalize(self.X)

    def subset(self, idx) -> "Dataset":
        # keep the parent's scaling so models trained on halves share a feature space
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.lo, self.hi)

    def normalization(self) -> dict:
        return {"feature_names": self.feature_names, "min": self.lo.tolist(), "max": self.hi.tolist()}


def load_csv(path) -> Dataset:
    """Header row of feature names and a final ``label`` column; all values numeric."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[-1] != "label":
        raise ValueError(f"{path}: last header column must be 'label'")
    data = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    arr = np.asarray(data, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{path}: no data rows")
    return Dataset.from_arrays(arr[:, :-1], arr[:, -1], header[:-1])


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, "label"])
        for x, y in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def read_vector(path) -> np.ndarray:
    """First numeric row of a CSV file (a header row is skipped)."""
    for row in csv.reader(Path(path).read_text().splitlines()):
        if not row:
            continue
        try:
            return np.asarray([float(c) for c in row], dtype=np.float64)
        except ValueError:
            continue
    raise ValueError(f"{path}: no numeric row found")


def read_matrix(path) -> np.ndarray:
    rows = []
    for row in csv.reader(Path(path).read_text().splitlines()):
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            continue
    return np.asarray(rows, dtype=np.float64)


def make_two_clusters(n: int = 200, *, d: int = 2, separation: float = 4.0, noise: float = 1.0,
                      seed: int = 0) -> Dataset:
    """Two Gaussian blobs; label 1 is centred at ``+separation/2`` on every axis."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    centres = np.where(y[:, None] == 1, separation / 2, -separation / 2)
    X = centres + rng.normal(0.0, noise, size=(n, d))
    perm = rng.permutation(n)
    return Dataset.from_arrays(X[perm], y[perm])


def split_halves(ds: Dataset, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Shuffle and split into two halves D1 and D2."""
    perm = np.random.default_rng(seed).permutation(ds.X.shape[0])
    half = ds.X.shape[0] // 2
    return ds.subset(perm[:half]), ds.subset(perm[half:])
