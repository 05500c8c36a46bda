"""Mini-batch DropOut Sampling and the random exemplar memory."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    label: int


@dataclass
class AnnotatedBatch:
    """A mini-batch stored column-wise.

    ``old_flags[i]`` marks samples whose label belongs to an old class;
    ``ce_values`` holds the current model's per-sample cross-entropy and
    is only needed in the curriculum phase.
    """

    ids: np.ndarray
    labels: np.ndarray
    old_flags: np.ndarray
    features: Optional[np.ndarray] = None
    ce_values: Optional[np.ndarray] = None

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.old_flags = np.asarray(self.old_flags, dtype=bool)
        n = len(self.ids)
        if len(self.labels) != n or len(self.old_flags) != n:
            raise InputError("batch columns are not aligned")
        if self.features is not None and len(self.features) != n:
            raise InputError("batch features are not aligned")
        if self.ce_values is not None:
            self.ce_values = np.asarray(self.ce_values, dtype=np.float64)
            if len(self.ce_values) != n:
                raise InputError("ce_values are not aligned with the batch")
            if not np.isfinite(self.ce_values).all():
                raise InputError("ce_values must be finite")

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], old_classes, ce_values=None):
        old = set(old_classes)
        return cls(
            ids=[s.id for s in samples],
            labels=[s.label for s in samples],
            old_flags=[s.label in old for s in samples],
            features=np.array([s.features for s in samples]) if samples else None,
            ce_values=ce_values,
        )

    def __len__(self):
        return len(self.ids)

    @property
    def samples(self) -> list[Sample]:
        feats = self.features if self.features is not None else [None] * len(self)
        return [Sample(int(i), f, int(y)) for i, f, y in zip(self.ids, feats, self.labels)]

    def take(self, keep: np.ndarray) -> "AnnotatedBatch":
        return AnnotatedBatch(
            self.ids[keep],
            self.labels[keep],
            self.old_flags[keep],
            None if self.features is None else self.features[keep],
            None if self.ce_values is None else self.ce_values[keep],
        )


def dos_drop_count(n_old: int, n_new: int, clamp: bool = False) -> int:
    """Number of new-class samples removed from a batch."""
    alpha = max(min(n_old, n_new), n_new // 2)
    if clamp:
        alpha = min(alpha, max(n_new - 1, 0))
    return alpha


def dos_filter(
    batch: AnnotatedBatch, epoch: int, K: int, seed, clamp: bool = False
) -> AnnotatedBatch:
    """Drop new-class samples from a mini-batch.

    Up to epoch ``K`` (inclusive) the dropped samples are chosen uniformly
    at random; afterwards the highest-CE new-class samples are dropped,
    ties broken by ascending sample id. Old-class samples are always kept.
    """
    if len(batch) == 0:
        raise InputError("batch must be non-empty")
    new_pos = np.flatnonzero(~batch.old_flags)
    n_old = len(batch) - len(new_pos)
    n_drop = dos_drop_count(n_old, len(new_pos), clamp)
    # canonical order so the outcome does not depend on how the batch was shuffled
    new_pos = new_pos[np.argsort(batch.ids[new_pos], kind="stable")]
    if epoch <= K:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        dropped = new_pos[rng.permutation(len(new_pos))[:n_drop]]
    else:
        if batch.ce_values is None:
            raise InputError("ce_values are required after the random phase")
        ce = batch.ce_values[new_pos]
        order = np.lexsort((batch.ids[new_pos], -ce))
        dropped = new_pos[order[:n_drop]]
    keep = np.ones(len(batch), dtype=bool)
    keep[dropped] = False
    return batch.take(keep)


@dataclass
class ExemplarMemory:
    budget: int
    per_class: dict = field(default_factory=dict)
    quota: int = 0

    def __len__(self):
        return sum(len(v) for v in self.per_class.values())

    @property
    def classes(self) -> list[int]:
        return sorted(self.per_class)

    def samples(self) -> list[Sample]:
        return [s for c in self.classes for s in self.per_class[c]]


def _subset(rng: np.random.Generator, items: Sequence, size: int) -> list:
    if size >= len(items):
        return list(items)
    idx = np.sort(rng.choice(len(items), size=size, replace=False))
    return [items[i] for i in idx]


def _class_rng(seed, cls: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(cls)])


def reserve_memory(pools: Mapping[int, Sequence[Sample]], budget: int, seed) -> ExemplarMemory:
    """Randomly keep ``budget // n_classes`` samples of every class."""
    if budget < 0:
        raise InputError("budget must be non-negative")
    if budget > 0 and not pools:
        raise InputError("cannot fill a positive budget from empty pools")
    if budget == 0:
        return ExemplarMemory(0, {c: [] for c in pools}, 0)
    if budget < len(pools):
        raise InputError(f"budget {budget} cannot hold one sample for each of {len(pools)} classes")
    quota = budget // len(pools)
    per_class = {}
    for c in sorted(pools):
        _check_labels(c, pools[c])
        per_class[c] = _subset(_class_rng(seed, c), list(pools[c]), quota)
    return ExemplarMemory(budget, per_class, quota)


def _check_labels(c, samples):
    for s in samples:
        if s.label != c:
            raise InputError(f"sample {s.id} with label {s.label} filed under class {c}")


def rebalance_memory(
    memory: ExemplarMemory, new_classes: Mapping[int, Sequence[Sample]], seed
) -> ExemplarMemory:
    """Shrink stored classes to the new quota and add the new classes."""
    overlap = set(new_classes) & set(memory.per_class)
    if overlap:
        raise InputError(f"classes already stored in memory: {sorted(overlap)}")
    if not new_classes:
        return ExemplarMemory(memory.budget, {c: list(v) for c, v in memory.per_class.items()}, memory.quota)
    n_total = len(memory.per_class) + len(new_classes)
    quota = memory.budget // n_total
    per_class = {}
    for c in sorted(memory.per_class):
        per_class[c] = _subset(_class_rng(seed, c), memory.per_class[c], quota)
    for c in sorted(new_classes):
        _check_labels(c, new_classes[c])
        per_class[c] = _subset(_class_rng(seed, c), list(new_classes[c]), quota)
    return ExemplarMemory(memory.budget, per_class, quota)


def balanced_set(
    memory: ExemplarMemory,
    new_class_samples: Mapping[int, Sequence[Sample]],
    seed,
    per_class: Optional[int] = None,
) -> list[Sample]:
    """Class-balanced fine-tuning set with ``per_class`` samples per class.

    ``per_class`` defaults to the memory's quota. Stored classes holding
    more than that are subsampled; a class with too few samples
    contributes all of them and triggers a warning.
    """
    if not new_class_samples:
        raise InputError("balanced_set needs at least one new class")
    m = memory.quota if per_class is None else per_class
    if m <= 0:
        m = memory.budget // (len(memory.per_class) + len(new_class_samples))
    out = []
    pools = {**{c: v for c, v in memory.per_class.items()}, **dict(new_class_samples)}
    for c in sorted(pools):
        items = list(pools[c])
        if len(items) < m:
            warnings.warn(f"class {c} has only {len(items)} samples for a quota of {m}", stacklevel=2)
        out.extend(_subset(_class_rng(seed, c), items, m))
    return out
