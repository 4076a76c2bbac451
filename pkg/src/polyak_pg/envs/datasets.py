"""Synthetic linearly separable classification data."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import InputError


@dataclass(frozen=True)
class LinearSeparableDataset:
    features: np.ndarray   # (n, d)
    labels: np.ndarray     # (n,) in {0, 1}
    margin: float
    separator: np.ndarray  # unit vector used for the construction

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def make_linearly_separable(n: int, d: int, margin: float, seed=None) -> LinearSeparableDataset:
    """Gaussian points labelled by a random unit separator ``w``.

    Points with ``|w.x| < margin`` are shifted along ``w`` onto the margin
    boundary on their own side, so every point satisfies ``|w.x| >= margin``.
    """
    if n < 2 or d < 1 or not margin > 0:
        raise InputError("need n >= 2, d >= 1 and margin > 0")
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    X = rng.normal(size=(n, d))
    proj = X @ w
    side = np.where(proj >= 0.0, 1.0, -1.0)
    inside = np.abs(proj) < margin
    X[inside] += ((side * margin - proj)[inside])[:, None] * w
    labels = (side > 0).astype(int)
    return LinearSeparableDataset(X, labels, float(margin), w)


def write_dataset_csv(dataset: LinearSeparableDataset, path) -> None:
    """Header ``x0,...,x{d-1},label`` then one row per example."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k}" for k in range(dataset.d)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_dataset_csv(path):
    """Inverse of :func:`write_dataset_csv`; returns ``(features, labels)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1].astype(int)
