"""Columnar datasets, synthetic Gaussian blobs and the dataset CSV format."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, InputError, LogParseError
from ..sampling import Sample
from .files import atomic_write_text


@dataclass
class Dataset:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise InputError("features must be a 2-D array")
        if not len(self.ids) == len(self.features) == len(self.labels):
            raise InputError("dataset columns are not aligned")

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.labels))

    def subset(self, mask_or_index) -> "Dataset":
        return Dataset(self.ids[mask_or_index], self.features[mask_or_index], self.labels[mask_or_index])

    def of_classes(self, classes) -> "Dataset":
        return self.subset(np.isin(self.labels, list(classes)))

    def samples(self) -> list[Sample]:
        return [Sample(int(i), x, int(y)) for i, x, y in zip(self.ids, self.features, self.labels)]

    def by_class(self, classes=None) -> dict[int, list[Sample]]:
        classes = self.classes if classes is None else classes
        out = {int(c): [] for c in classes}
        for s in self.samples():
            if s.label in out:
                out[s.label].append(s)
        return out

    @classmethod
    def from_samples(cls, samples, dim: int) -> "Dataset":
        if not samples:
            return cls(np.zeros(0, np.int64), np.zeros((0, dim)), np.zeros(0, np.int64))
        return cls([s.id for s in samples], np.array([s.features for s in samples]), [s.label for s in samples])

    @classmethod
    def concat(cls, parts) -> "Dataset":
        return cls(
            np.concatenate([p.ids for p in parts]),
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )


def stratified_split(data: Dataset, test_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Per-class seeded shuffle; the last ``test_fraction`` of each class goes to test."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in data.classes:
        idx = np.flatnonzero(data.labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test_idx.append(idx[len(idx) - n_test :])
        train_idx.append(idx[: len(idx) - n_test])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return data.subset(tr), data.subset(te)


def generate_blobs(
    n_classes: int,
    samples_per_class: int,
    dim: int,
    separation: float,
    seed,
    test_fraction: float = 0.2,
) -> tuple[Dataset, Dataset]:
    """Isotropic unit-variance Gaussian classes around seeded random centers."""
    if dim < 1:
        raise ConfigurationError("dim must be at least 1")
    if n_classes < 1 or samples_per_class < 1:
        raise ConfigurationError("class and sample counts must be positive")
    if separation < 0:
        raise ConfigurationError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_classes, dim)) * separation
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    features = centers[labels] + rng.standard_normal((len(labels), dim))
    data = Dataset(np.arange(len(labels)), features, labels)
    return stratified_split(data, test_fraction, rng)


def dataset_to_csv_text(data: Dataset) -> str:
    header = ["id", "label"] + [f"f{i}" for i in range(data.dim)]
    lines = [",".join(header)]
    for i, y, x in zip(data.ids, data.labels, data.features):
        lines.append(",".join([str(int(i)), str(int(y))] + [repr(float(v)) for v in x]))
    return "\n".join(lines) + "\n"


def write_dataset_csv(data: Dataset, path) -> None:
    atomic_write_text(path, dataset_to_csv_text(data))


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LogParseError(path, 1, "file is empty") from None
        dim = len(header) - 2
        expected = ["id", "label"] + [f"f{i}" for i in range(dim)]
        if dim < 1 or header != expected:
            raise LogParseError(path, 1, f"expected header {','.join(expected)}")
        ids, labels, feats = [], [], []
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise LogParseError(path, line, f"expected {len(header)} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                feats.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise LogParseError(path, line, str(exc)) from None
    if len(set(ids)) != len(ids):
        raise LogParseError(path, None, "duplicate sample ids")
    return Dataset(np.array(ids, dtype=np.int64), np.array(feats).reshape(-1, dim), np.array(labels, dtype=np.int64))
