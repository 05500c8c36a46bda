"""Task configurations (class-group orderings) and incremental schedules."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InputError, LogParseError

ORDERS = ("best_first", "worst_first")


@dataclass(frozen=True)
class TaskConfiguration:
    groups: tuple[tuple[int, ...], ...]
    group_size: int

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(int(c) for c in g) for g in self.groups))
        if self.group_size < 1:
            raise ConfigurationError("group_size must be positive")
        flat = [c for g in self.groups for c in g]
        if len(flat) != len(set(flat)):
            raise ConfigurationError("class groups overlap")
        for g in self.groups[:-1]:
            if len(g) != self.group_size:
                raise ConfigurationError(f"group {g} does not have {self.group_size} classes")
        if self.groups and not 1 <= len(self.groups[-1]) <= self.group_size:
            raise ConfigurationError("last group has an invalid size")

    @property
    def classes(self) -> list[int]:
        return [c for g in self.groups for c in g]

    def to_json(self) -> str:
        groups = ",\n    ".join(json.dumps(list(g)) for g in self.groups)
        return f'{{\n  "group_size": {self.group_size},\n  "groups": [\n    {groups}\n  ]\n}}'

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json() + "\n")
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "TaskConfiguration":
        try:
            data = json.loads(Path(path).read_text())
            return cls(tuple(tuple(g) for g in data["groups"]), int(data["group_size"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            line = getattr(exc, "lineno", None)
            raise LogParseError(path, line, f"invalid task configuration: {exc}") from exc


def _chunk(order: Sequence[int], group_size: int) -> TaskConfiguration:
    groups = [tuple(order[i : i + group_size]) for i in range(0, len(order), group_size)]
    return TaskConfiguration(tuple(groups), group_size)


def random_configuration(n_classes: int, group_size: int, seed) -> TaskConfiguration:
    if group_size < 1 or group_size > n_classes:
        raise ConfigurationError(f"group_size must lie in [1, {n_classes}], got {group_size}")
    perm = np.random.default_rng(seed).permutation(n_classes)
    return _chunk([int(c) for c in perm], group_size)


def sorted_configuration(
    classwise_accuracy: Mapping[int, float], group_size: int, order: str = "best_first"
) -> TaskConfiguration:
    """Chunk classes ordered by reference accuracy; ties go to the lower class index."""
    if order not in ORDERS:
        raise InputError(f"order must be one of {ORDERS}")
    if not classwise_accuracy:
        raise InputError("classwise_accuracy is empty")
    classes = sorted(classwise_accuracy)
    if classes != list(range(len(classes))):
        raise InputError("classwise_accuracy must cover every class index 0..n-1")
    for c, a in classwise_accuracy.items():
        if not 0.0 <= a <= 1.0:
            raise InputError(f"accuracy of class {c} outside [0, 1]: {a}")
    sign = -1.0 if order == "best_first" else 1.0
    ranked = sorted(classes, key=lambda c: (sign * classwise_accuracy[c], c))
    if group_size < 1 or group_size > len(classes):
        raise ConfigurationError(f"group_size must lie in [1, {len(classes)}]")
    return _chunk(ranked, group_size)


@dataclass(frozen=True)
class TaskSchedule:
    """Old/new/seen class sets per step. Steps are numbered from 1."""

    config: TaskConfiguration

    @property
    def n_steps(self) -> int:
        return len(self.config.groups)

    @property
    def groups(self):
        return self.config.groups

    def _check(self, k):
        if not 1 <= k <= self.n_steps:
            raise InputError(f"step {k} outside 1..{self.n_steps}")

    def new_classes(self, k: int) -> tuple[int, ...]:
        self._check(k)
        return self.config.groups[k - 1]

    def old_classes(self, k: int) -> tuple[int, ...]:
        self._check(k)
        return tuple(c for g in self.config.groups[: k - 1] for c in g)

    def seen_classes(self, k: int) -> tuple[int, ...]:
        self._check(k)
        return tuple(c for g in self.config.groups[:k] for c in g)

    def group_of(self) -> dict[int, int]:
        """Map class -> 1-based step in which it is introduced."""
        return {c: k + 1 for k, g in enumerate(self.config.groups) for c in g}


def build_schedule(cfg: TaskConfiguration) -> TaskSchedule:
    return TaskSchedule(cfg)
