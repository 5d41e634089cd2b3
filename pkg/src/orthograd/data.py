"""Datasets and unlearn/retain/test splits.

A Dataset is a pair of arrays (float64 features, int64 labels) plus the
class count and a short provenance string.  Splits carve one training set
into the unlearn set D_u and retain set D_r, keeping them disjoint; for
class forgetting the test set is partitioned as well so the test metric
never sees the forgotten class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "Splits",
    "gen_gaussian_blobs",
    "partition_train_test",
    "load_csv_dataset",
    "save_csv_dataset",
    "make_unlearn_split",
]


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    provenance: str = ""

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)
        if x.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(f"labels must have shape ({x.shape[0]},), got {y.shape}")
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")
        if x.shape[0] > 0 and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels out of range [0, {self.n_classes})")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices, provenance: str = "") -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes,
                       provenance or self.provenance)


@dataclass(frozen=True)
class Splits:
    """Unlearn/retain/test partition of an experiment.

    ``test`` is what the test-accuracy metric sees; in class mode it already
    excludes the forgotten class, whose test points live in ``heldout``.
    """

    unlearn: Dataset
    retain: Dataset
    test: Dataset
    mode: str                       # "random" or "class"
    heldout: Dataset | None = None  # class mode only
    forgotten_class: int = -1

    @property
    def n_retain(self) -> int:
        return len(self.retain)


def gen_gaussian_blobs(n_classes: int, dim: int, per_class: int,
                       spread: float = 1.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian class clusters with controlled separation.

    Class means are random unit directions rescaled so the minimum pairwise
    distance is 4 * spread; samples are mean + N(0, spread^2 I).  Points are
    grouped by class (all of class 0 first, then class 1, ...), which keeps
    deterministic train/test partitioning trivial.
    """
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if dim < 1 or per_class < 1:
        raise ValueError(f"dim and per_class must be >= 1, got {dim}, {per_class}")
    if not (spread > 0):
        raise ValueError(f"spread must be positive, got {spread}")

    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(n_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    min_dist = min(
        float(np.linalg.norm(directions[i] - directions[j]))
        for i in range(n_classes) for j in range(i + 1, n_classes))
    if min_dist <= 0:
        raise ValueError("degenerate class directions (duplicate unit vectors)")
    means = directions * (4.0 * spread / min_dist)

    inputs = np.empty((n_classes * per_class, dim))
    labels = np.empty(n_classes * per_class, dtype=np.int64)
    for c in range(n_classes):
        block = slice(c * per_class, (c + 1) * per_class)
        inputs[block] = means[c] + rng.normal(0.0, spread, size=(per_class, dim))
        labels[block] = c
    return Dataset(inputs, labels, n_classes, provenance=f"blobs(seed={seed})")


def partition_train_test(data: Dataset, train_per_class: int) -> tuple[Dataset, Dataset]:
    """Split a class-grouped dataset into train/test by per-class position."""
    counts = np.bincount(data.labels, minlength=data.n_classes)
    if np.any(counts <= train_per_class):
        raise ValueError(
            f"every class needs more than {train_per_class} points, got counts {counts.tolist()}")
    train_idx, test_idx = [], []
    for c in range(data.n_classes):
        members = np.flatnonzero(data.labels == c)
        train_idx.append(members[:train_per_class])
        test_idx.append(members[train_per_class:])
    return (data.subset(np.concatenate(train_idx), provenance=data.provenance + "/train"),
            data.subset(np.concatenate(test_idx), provenance=data.provenance + "/test"))


def load_csv_dataset(path, n_features: int, n_classes: int) -> Dataset:
    """Load ``f1,...,fn,label`` lines; errors carry the 1-based line number."""
    from pathlib import Path

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    rows: list[list[float]] = []
    labels: list[int] = []
    with open(p, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != n_features + 1:
                raise ValueError(
                    f"{p}:{lineno}: expected {n_features + 1} fields "
                    f"({n_features} features + label), got {len(fields)}")
            try:
                feats = [float(f) for f in fields[:-1]]
            except ValueError:
                raise ValueError(f"{p}:{lineno}: non-numeric feature value") from None
            try:
                label = int(fields[-1])
            except ValueError:
                raise ValueError(f"{p}:{lineno}: label must be an integer, got {fields[-1]!r}") from None
            if not 0 <= label < n_classes:
                raise ValueError(f"{p}:{lineno}: label {label} out of range [0, {n_classes})")
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise ValueError(f"{p}: dataset is empty")
    return Dataset(np.array(rows), np.array(labels, dtype=np.int64), n_classes,
                   provenance=str(p))


def save_csv_dataset(path, data: Dataset) -> None:
    """Write the CSV form; %.17g keeps the float64 round trip exact."""
    lines = []
    for x, y in zip(data.inputs, data.labels):
        lines.append(",".join(f"{v:.17g}" for v in x) + f",{int(y)}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_unlearn_split(train: Dataset, test: Dataset, mode: str, retain_size: int,
                       seed: int = 0, fraction: float = 0.05,
                       class_label: int = -1) -> Splits:
    """Build disjoint D_u / D_r plus the matching test view.

    random mode: D_u is a uniform sample of ceil(fraction * N) training
    points; D_r is a uniform subsample of the remainder.  class mode: D_u is
    every training point of ``class_label``; D_r is sampled from the other
    classes; test points of the class move to ``heldout``.

    The unlearn set is drawn before the retain set, so for a fixed seed D_u
    is identical across different ``retain_size`` values.
    """
    if train.n_classes != test.n_classes:
        raise ValueError("train and test disagree on the number of classes")
    if len(train) == 0 or len(test) == 0:
        raise ValueError("train and test sets must be non-empty")
    rng = np.random.default_rng(seed)
    n = len(train)

    if mode == "random":
        if not 0.0 < fraction < 1.0:
            raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
        n_u = math.ceil(fraction * n)
        unlearn_idx = np.sort(rng.choice(n, size=n_u, replace=False))
        mask = np.ones(n, dtype=bool)
        mask[unlearn_idx] = False
        pool = np.flatnonzero(mask)
        heldout = None
        test_view = test
        forgotten = -1
    elif mode == "class":
        if not 0 <= class_label < train.n_classes:
            raise ValueError(f"class_label {class_label} out of range [0, {train.n_classes})")
        unlearn_idx = np.flatnonzero(train.labels == class_label)
        if unlearn_idx.size == 0:
            raise ValueError(f"training set has no points of class {class_label}")
        pool = np.flatnonzero(train.labels != class_label)
        test_keep = np.flatnonzero(test.labels != class_label)
        test_drop = np.flatnonzero(test.labels == class_label)
        if test_keep.size == 0:
            raise ValueError("test set would be empty after removing the forgotten class")
        test_view = test.subset(test_keep, provenance=test.provenance + "/kept")
        heldout = test.subset(test_drop, provenance=test.provenance + "/forgotten")
        forgotten = class_label
    else:
        raise ValueError(f"mode must be 'random' or 'class', got {mode!r}")

    if not 1 <= retain_size <= pool.size:
        raise ValueError(f"retain_size must lie in [1, {pool.size}], got {retain_size}")
    retain_idx = np.sort(rng.choice(pool, size=retain_size, replace=False))

    return Splits(
        unlearn=train.subset(unlearn_idx, provenance=train.provenance + "/unlearn"),
        retain=train.subset(retain_idx, provenance=train.provenance + "/retain"),
        test=test_view,
        mode=mode,
        heldout=heldout,
        forgotten_class=forgotten,
    )
