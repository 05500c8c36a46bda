"""Experiment configuration: nested dataclasses with a JSON round trip."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ConfigurationError, LogParseError

TASK_MODES = ("random", "best_first", "worst_first", "pinned")


@dataclass
class DataConfig:
    source: str = "synthetic"  # "synthetic" or "csv"
    csv_path: Optional[str] = None
    n_classes: int = 10
    samples_per_class: int = 100
    dim: int = 16
    separation: float = 1.0
    test_fraction: float = 0.2


@dataclass
class ModelConfig:
    hidden: list = field(default_factory=lambda: [32, 32])


@dataclass
class TaskConfig:
    mode: str = "random"
    group_size: int = 2
    pinned_path: Optional[str] = None


@dataclass
class DOSConfig:
    enabled: bool = True
    K: Optional[int] = None  # defaults to epochs // 2
    clamp: bool = False


@dataclass
class ObjectiveSettings:
    alpha: float = 1.0
    temperature: float = 1.0
    mer_enabled: bool = True
    # "single": one snapshot from the previous step teaches every past group.
    # "per_task" (one stored snapshot per past step) is reserved, not implemented.
    teacher_mode: str = "single"


@dataclass
class FinetuneConfig:
    enabled: bool = True
    epoch_fraction: float = 0.2
    lr_multiplier: float = 0.1


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32


@dataclass
class ExperimentConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    tasks: TaskConfig = field(default_factory=TaskConfig)
    memory_budget: int = 50
    epochs: int = 20
    reference_epochs: Optional[int] = None  # defaults to epochs
    dos: DOSConfig = field(default_factory=DOSConfig)
    objective: ObjectiveSettings = field(default_factory=ObjectiveSettings)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.data.source not in ("synthetic", "csv"):
            raise ConfigurationError(f"unknown data source {self.data.source!r}")
        if self.data.source == "csv" and not self.data.csv_path:
            raise ConfigurationError("data.csv_path is required for csv data")
        if not 0 < self.data.test_fraction < 1:
            raise ConfigurationError("data.test_fraction must lie in (0, 1)")
        if self.tasks.mode not in TASK_MODES:
            raise ConfigurationError(f"tasks.mode must be one of {TASK_MODES}")
        if self.tasks.mode == "pinned" and not self.tasks.pinned_path:
            raise ConfigurationError("tasks.pinned_path is required in pinned mode")
        if self.tasks.group_size < 1:
            raise ConfigurationError("tasks.group_size must be positive")
        if self.memory_budget < 0:
            raise ConfigurationError("memory_budget must be non-negative")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be positive")
        if self.optimizer.batch_size < 1:
            raise ConfigurationError("optimizer.batch_size must be positive")
        if not self.optimizer.learning_rate > 0:
            raise ConfigurationError("optimizer.learning_rate must be positive")
        if not 0 <= self.optimizer.momentum < 1:
            raise ConfigurationError("optimizer.momentum must lie in [0, 1)")
        if self.objective.alpha < 0 or self.objective.temperature <= 0:
            raise ConfigurationError("objective.alpha must be >= 0 and temperature > 0")
        if self.objective.teacher_mode != "single":
            raise ConfigurationError(
                f"objective.teacher_mode {self.objective.teacher_mode!r} is not supported; only 'single' is implemented"
            )
        if not 0 <= self.finetune.epoch_fraction <= 1:
            raise ConfigurationError("finetune.epoch_fraction must lie in [0, 1]")
        if any(int(h) < 1 for h in self.model.hidden):
            raise ConfigurationError("hidden layer sizes must be positive")

    @property
    def dos_K(self) -> int:
        return self.epochs // 2 if self.dos.K is None else self.dos.K

    @property
    def finetune_epochs(self) -> int:
        return max(1, round(self.finetune.epoch_fraction * self.epochs)) if self.finetune.enabled else 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"dos.enabled": False})``."""
        d = self.to_dict()
        for key, value in changes.items():
            node = d
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigurationError(f"unknown config field {key!r}")
            node[leaf] = value
        return ExperimentConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise LogParseError(path, exc.lineno, exc.msg) from None
        except OSError as exc:
            raise LogParseError(path, None, str(exc)) from None
        return cls.from_dict(d)


def _build(cls, d, prefix):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{prefix or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in d.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value, f"{prefix}{name}.") if sub else value
    return cls(**kwargs)


_NESTED = {
    (ExperimentConfig, "data"): DataConfig,
    (ExperimentConfig, "model"): ModelConfig,
    (ExperimentConfig, "tasks"): TaskConfig,
    (ExperimentConfig, "dos"): DOSConfig,
    (ExperimentConfig, "objective"): ObjectiveSettings,
    (ExperimentConfig, "finetune"): FinetuneConfig,
    (ExperimentConfig, "optimizer"): OptimizerConfig,
}

VARIANTS = {
    "MEDIC": {"objective.mer_enabled": True, "dos.enabled": True},
    "MEDIC w/o MER": {"objective.mer_enabled": False, "dos.enabled": True},
    "MEDIC w/o DOS": {"objective.mer_enabled": True, "dos.enabled": False},
    "MEDIC w/o MER, DOS": {"objective.mer_enabled": False, "dos.enabled": False},
}
