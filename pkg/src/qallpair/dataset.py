"""Labeled data ingestion and the per-pair training subsets of the all-pair scheme."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised when input data violates the dataset invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledExample:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """M examples of dimension d with integer labels in 1..k.

    ``label_names`` holds the original string labels when ingestion mapped
    them onto 1..k (entry i names class i + 1).
    """

    X: np.ndarray
    y: np.ndarray
    k: int
    label_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetError("no examples")
        if X.shape[1] == 0:
            raise DatasetError("feature dimension must be positive")
        if y.shape != (X.shape[0],):
            raise DatasetError("label count does not match example count")
        if not np.all(np.isfinite(X)):
            raise DatasetError("non-finite feature value")
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise DatasetError("labels must be integers")
        y = y.astype(int)
        if y.min() < 1 or y.max() > self.k:
            raise DatasetError(f"labels must lie in 1..{self.k}")
        present = set(np.unique(y).tolist())
        for c in range(1, self.k + 1):
            if c not in present:
                raise DatasetError(f"class {c} unrepresented")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(x, int(c)) for x, c in zip(self.X, self.y)]

    @classmethod
    def from_examples(cls, examples, k: int | None = None) -> "Dataset":
        examples = list(examples)
        if not examples:
            raise DatasetError("no examples")
        dims = {len(e.features) for e in examples}
        if len(dims) != 1:
            raise DatasetError("examples differ in feature dimension")
        X = np.array([e.features for e in examples], dtype=float)
        y = np.array([e.label for e in examples])
        return cls(X, y, int(y.max()) if k is None else k)


@dataclass(frozen=True)
class PairSubset:
    """Training examples of classes f and s, with f mapped to +1 and s to -1."""

    f: int
    s: int
    X: np.ndarray
    labels: np.ndarray
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.f < self.s:
            raise DatasetError("pair must satisfy f < s")
        labels = np.asarray(self.labels, dtype=int)
        if not set(labels.tolist()) <= {self.f, self.s}:
            raise DatasetError("subset contains a foreign class")
        if not (np.any(labels == self.f) and np.any(labels == self.s)):
            raise DatasetError(f"pair ({self.f},{self.s}) lacks one of its classes")
        object.__setattr__(self, "X", _frozen(np.asarray(self.X, dtype=float)))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "indices", _frozen(np.asarray(self.indices, dtype=int)))

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def binary_labels(self) -> np.ndarray:
        return np.where(self.labels == self.f, 1.0, -1.0)

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(x, int(c)) for x, c in zip(self.X, self.labels)]


def canonical_pairs(k: int) -> list[tuple[int, int]]:
    """All (f, s) with 1 <= f < s <= k in lexicographic order."""
    return list(combinations(range(1, k + 1), 2))


def pair_subsets(ds: Dataset) -> list[PairSubset]:
    out = []
    for f, s in canonical_pairs(ds.k):
        idx = np.flatnonzero((ds.y == f) | (ds.y == s))
        out.append(PairSubset(f, s, ds.X[idx], ds.y[idx], idx))
    return out


def unit_normalize(ds: Dataset) -> Dataset:
    norms = np.linalg.norm(ds.X, axis=1)
    if np.any(norms == 0):
        i = int(np.flatnonzero(norms == 0)[0])
        raise DatasetError(f"zero feature vector at example {i}")
    return Dataset(ds.X / norms[:, None], ds.y, ds.k, ds.label_names)


def load_csv(path, map_labels: bool = False) -> Dataset:
    """Read ``f0,...,f{d-1},label`` rows; the label column is last.

    With ``map_labels`` the label column may hold arbitrary strings; they are
    sorted and numbered 1..k, and the names are kept on the dataset.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError("missing header row")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) < 2:
        raise DatasetError("header must name at least one feature and the label")
    d = len(header) - 1
    if not body:
        raise DatasetError("no examples")
    X = np.empty((len(body), d))
    raw_labels = []
    for lineno, row in enumerate(body, start=2):
        if len(row) != d + 1:
            raise DatasetError(f"row {lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            X[lineno - 2] = [float(v) for v in row[:d]]
        except ValueError:
            raise DatasetError(f"row {lineno}: non-numeric feature") from None
        raw_labels.append(row[d].strip())

    if map_labels:
        names = tuple(sorted(set(raw_labels)))
        lookup = {n: i + 1 for i, n in enumerate(names)}
        return Dataset(X, np.array([lookup[n] for n in raw_labels]), len(names), names)

    y = np.empty(len(raw_labels), dtype=int)
    for i, lab in enumerate(raw_labels):
        try:
            y[i] = int(lab)
        except ValueError:
            raise DatasetError(f"row {i + 2}: non-integer label {lab!r}") from None
        if y[i] < 1:
            raise DatasetError(f"row {i + 2}: label {y[i]} < 1")
    return Dataset(X, y, int(y.max()))


def write_csv(path, X, y=None) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        cols = [f"f{i}" for i in range(X.shape[1])]
        w.writerow(cols + (["label"] if y is not None else []))
        for i, row in enumerate(X):
            vals = [repr(float(v)) for v in row]
            w.writerow(vals + ([str(int(y[i]))] if y is not None else []))


def gaussian_blobs(n_per_class: int, k: int = 3, d: int = 2, spread: float = 0.35,
                   radius: float = 2.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters with centers spaced on a circle."""
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = radius * np.cos(angles)
    if d > 1:
        centers[:, 1] = radius * np.sin(angles)
    X = np.concatenate([c + spread * rng.standard_normal((n_per_class, d)) for c in centers])
    y = np.repeat(np.arange(1, k + 1), n_per_class)
    perm = rng.permutation(len(y))
    return Dataset(X[perm], y[perm], k)
