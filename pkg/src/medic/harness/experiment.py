"""End-to-end incremental training runs and report recomputation."""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .. import nncore
from ..errors import ExperimentError, InputError, LogParseError, MedicError
from ..losses import ObjectiveConfig
from ..metrics import MetricReport, PredictionLog, compute_metric_report
from ..sampling import AnnotatedBatch, ExemplarMemory, balanced_set, dos_filter, rebalance_memory, reserve_memory
from ..tasks import TaskConfiguration, TaskSchedule, build_schedule, random_configuration, sorted_configuration
from .config import VARIANTS, ExperimentConfig
from .data import Dataset, generate_blobs, read_dataset_csv, stratified_split, write_dataset_csv
from .files import (
    atomic_write_text,
    read_prediction_log,
    report_csv_text,
    write_metric_report,
    write_metric_trace,
    write_prediction_log,
)

log = logging.getLogger(__name__)

BASELINE = {
    "objective.alpha": 0.0,
    "objective.mer_enabled": False,
    "dos.enabled": False,
    "finetune.enabled": False,
}


def derive_seed(master: int, *keys) -> int:
    """Independent 63-bit seed for a named stream, e.g. ("dos", k, epoch, b)."""
    words = [int(master) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(2, np.uint64)[0] >> np.uint64(1))


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    d = cfg.data
    if d.source == "synthetic":
        return generate_blobs(d.n_classes, d.samples_per_class, d.dim, d.separation, derive_seed(cfg.seed, "data"), d.test_fraction)
    full = read_dataset_csv(d.csv_path)
    return stratified_split(full, d.test_fraction, derive_seed(cfg.seed, "split"))


def _predict(model, data: Dataset, class_order: Sequence[int]) -> np.ndarray:
    logits = nncore.forward(model, data.features)
    return np.asarray(class_order, dtype=np.int64)[np.argmax(logits, axis=1)]


def _prediction_log(step, model, data: Dataset, class_order) -> PredictionLog:
    return PredictionLog(step, data.ids, data.labels, _predict(model, data, class_order), tuple(class_order))


def _per_sample_ce(model, X, cols) -> np.ndarray:
    z = nncore.forward(model, X)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(cols)), cols]


def _fit(
    model,
    X,
    cols,
    ids,
    *,
    epochs: int,
    batch_size: int,
    opt: nncore.OptimizerState,
    objective: ObjectiveConfig,
    teacher=None,
    past_groups=(),
    n_old_cols: int = 0,
    dos=None,
    seed_key=(),
    master: int = 0,
):
    """Mini-batch SGD over (X, cols). ``dos`` is (K, clamp) or None."""
    n = len(X)
    for epoch in range(1, epochs + 1):
        order = np.random.default_rng(derive_seed(master, *seed_key, "order", epoch)).permutation(n)
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            if dos is not None:
                K, clamp = dos
                ce = _per_sample_ce(model, X[idx], cols[idx]) if epoch > K else None
                batch = AnnotatedBatch(ids[idx], cols[idx], cols[idx] < n_old_cols, ce_values=ce)
                kept = dos_filter(batch, epoch, K, derive_seed(master, *seed_key, "dos", epoch, b), clamp)
                idx = idx[np.isin(ids[idx], kept.ids)]
            if len(idx) == 0:
                continue
            nncore.train_step(model, X[idx], cols[idx], objective, opt, teacher, past_groups)
            if not model.is_finite():
                raise ExperimentError("train", "non-finite parameters after an update")


@dataclass
class ReferenceResult:
    model: nncore.ClassifierModel
    class_accuracy: dict
    log: PredictionLog


def train_reference(
    train: Dataset,
    test: Dataset,
    classes: Sequence[int],
    cfg: ExperimentConfig,
    seed: int,
    step: int = 0,
) -> ReferenceResult:
    """Model trained from scratch on every training sample of ``classes``."""
    classes = [int(c) for c in classes]
    present = set(train.classes)
    missing = [c for c in classes if c not in present]
    if missing:
        raise InputError(f"no training data for classes {missing}")
    tr = train.of_classes(classes)
    te = test.of_classes(classes)
    col = {c: i for i, c in enumerate(classes)}
    cols = np.array([col[int(y)] for y in tr.labels], dtype=np.int64)
    model = nncore.init_model(nncore.mlp_arch(train.dim, cfg.model.hidden, len(classes)), seed)
    opt = nncore.OptimizerState.for_model(model, cfg.optimizer.learning_rate, cfg.optimizer.momentum)
    _fit(
        model,
        tr.features,
        cols,
        tr.ids,
        epochs=cfg.reference_epochs or cfg.epochs,
        batch_size=cfg.optimizer.batch_size,
        opt=opt,
        objective=ObjectiveConfig(alpha=0.0),
        seed_key=("reference-fit", step),
        master=seed,
    )
    plog = _prediction_log(step, model, te, classes)
    acc = {}
    for c in classes:
        m = te.labels == c
        acc[c] = float(np.mean(plog.predicted_labels[m] == c)) if m.any() else 0.0
    return ReferenceResult(model, acc, plog)


def _reference_key(cfg: ExperimentConfig, classes, step) -> str:
    parts = {
        "seed": cfg.seed,
        "data": cfg.to_dict()["data"],
        "hidden": list(cfg.model.hidden),
        "epochs": cfg.reference_epochs or cfg.epochs,
        "optimizer": cfg.to_dict()["optimizer"],
        "classes": [int(c) for c in classes],
        "step": step,
    }
    return json.dumps(parts, sort_keys=True)


def _cached_reference(cache, cfg, train, test, classes, step) -> ReferenceResult:
    key = _reference_key(cfg, classes, step)
    if cache is not None and key in cache:
        return cache[key]
    res = train_reference(train, test, classes, cfg, derive_seed(cfg.seed, "reference", step), step)
    if cache is not None:
        cache[key] = res
    return res


def resolve_configuration(cfg: ExperimentConfig, train, test, reference_cache=None) -> TaskConfiguration:
    t = cfg.tasks
    if t.mode == "pinned":
        return TaskConfiguration.load(t.pinned_path)
    classes = train.classes
    if classes != list(range(len(classes))):
        raise InputError("class labels must be 0..n-1")
    if t.mode == "random":
        return random_configuration(len(classes), t.group_size, derive_seed(cfg.seed, "tasks"))
    ref = _cached_reference(reference_cache, cfg, train, test, classes, 0)
    return sorted_configuration(ref.class_accuracy, t.group_size, t.mode)


@dataclass
class ExperimentReport:
    metrics: MetricReport
    config: dict
    paths: dict = field(default_factory=dict)
    memory_sizes: list = field(default_factory=list)


def _memory_dataset(memory: ExemplarMemory, dim: int) -> Dataset:
    return Dataset.from_samples(memory.samples(), dim)


def run_experiment(
    cfg: ExperimentConfig,
    output_dir=None,
    reference_cache: Optional[dict] = None,
    on_step: Optional[Callable] = None,
) -> ExperimentReport:
    """Train one method variant through every task and evaluate it.

    Artifacts are written to ``output_dir`` (or ``cfg.output_dir``) when
    one is given. ``reference_cache`` lets runs that share data and seed
    reuse reference models. ``on_step(k, model, teacher, memory)`` is
    called after each step with the teacher that supervised that step.
    """
    out = Path(output_dir or cfg.output_dir) if (output_dir or cfg.output_dir) else None
    paths = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "INCOMPLETE", "run in progress\n")
        atomic_write_text(out / "config.json", cfg.to_json() + "\n")
        paths["config"] = str(out / "config.json")

    stage = "data"
    try:
        train, test = load_data(cfg)
        stage = "tasks"
        tcfg = resolve_configuration(cfg, train, test, reference_cache)
        schedule = build_schedule(tcfg)
        if sorted(tcfg.classes) != train.classes:
            raise InputError("task configuration does not partition the dataset's classes")
        if out is not None:
            tcfg.save(out / "task_configuration.json")
            paths["task_configuration"] = str(out / "task_configuration.json")

        objective = ObjectiveConfig(cfg.objective.alpha, cfg.objective.temperature, cfg.objective.mer_enabled)
        inc_logs, ref_logs, mem_sizes = {}, {}, []
        model = None
        teacher = None
        memory = ExemplarMemory(cfg.memory_budget)
        class_order: list[int] = []
        group_cols: list[list[int]] = []

        for k in range(1, schedule.n_steps + 1):
            new = list(schedule.new_classes(k))
            stage = f"step {k}: expand"
            if model is None:
                arch = nncore.mlp_arch(train.dim, cfg.model.hidden, len(new))
                model = nncore.init_model(arch, derive_seed(cfg.seed, "init"))
            else:
                model = nncore.expand_head(model, len(new), derive_seed(cfg.seed, "expand", k))
            n_old_cols = len(class_order)
            group_cols.append(list(range(n_old_cols, n_old_cols + len(new))))
            class_order.extend(new)
            col = {c: i for i, c in enumerate(class_order)}
            past = group_cols[:-1]

            stage = f"step {k}: train"
            new_data = train.of_classes(new)
            pool = Dataset.concat([_memory_dataset(memory, train.dim), new_data])
            cols = np.array([col[int(y)] for y in pool.labels], dtype=np.int64)
            opt = nncore.OptimizerState.for_model(model, cfg.optimizer.learning_rate, cfg.optimizer.momentum)
            use_dos = cfg.dos.enabled and k >= 2
            _fit(
                model,
                pool.features,
                cols,
                pool.ids,
                epochs=cfg.epochs,
                batch_size=cfg.optimizer.batch_size,
                opt=opt,
                objective=objective,
                teacher=teacher,
                past_groups=past,
                n_old_cols=n_old_cols,
                dos=(cfg.dos_K, cfg.dos.clamp) if use_dos else None,
                seed_key=("incremental", k),
                master=cfg.seed,
            )

            new_pools = new_data.by_class(new)
            if cfg.finetune.enabled and k >= 2 and cfg.memory_budget > 0:
                stage = f"step {k}: finetune"
                quota = cfg.memory_budget // len(class_order)
                bal = balanced_set(memory, new_pools, derive_seed(cfg.seed, "balanced", k), per_class=quota)
                bal_data = Dataset.from_samples(bal, train.dim)
                bal_cols = np.array([col[int(y)] for y in bal_data.labels], dtype=np.int64)
                ft_opt = nncore.OptimizerState.for_model(
                    model, cfg.optimizer.learning_rate * cfg.finetune.lr_multiplier, cfg.optimizer.momentum
                )
                _fit(
                    model,
                    bal_data.features,
                    bal_cols,
                    bal_data.ids,
                    epochs=cfg.finetune_epochs,
                    batch_size=cfg.optimizer.batch_size,
                    opt=ft_opt,
                    objective=objective,
                    teacher=teacher,
                    past_groups=past,
                    seed_key=("finetune", k),
                    master=cfg.seed,
                )

            stage = f"step {k}: snapshot"
            step_teacher = teacher
            teacher = nncore.snapshot(model, step_index=k)

            stage = f"step {k}: memory"
            mem_seed = derive_seed(cfg.seed, "memory", k)
            if k == 1:
                memory = reserve_memory(new_pools, cfg.memory_budget, mem_seed)
            else:
                memory = rebalance_memory(memory, new_pools, mem_seed)
            if len(memory) > cfg.memory_budget:
                raise ExperimentError(stage, "memory exceeds its budget")
            mem_sizes.append(len(memory))

            stage = f"step {k}: evaluate"
            seen = list(schedule.seen_classes(k))
            inc_logs[k] = _prediction_log(k, model, test.of_classes(seen), class_order)
            stage = f"step {k}: reference"
            ref_logs[k] = _cached_reference(reference_cache, cfg, train, test, class_order, k).log

            if out is not None:
                p_inc = out / "logs" / f"incremental_step{k}.csv"
                p_ref = out / "logs" / f"reference_step{k}.csv"
                write_prediction_log(inc_logs[k], p_inc)
                write_prediction_log(ref_logs[k], p_ref)
                ckpt = out / "checkpoints" / f"incremental_step{k}.npz"
                ckpt.parent.mkdir(parents=True, exist_ok=True)
                nncore.save_checkpoint(model, ckpt)
                write_dataset_csv(_memory_dataset(memory, train.dim), out / "memory" / f"memory_step{k}.csv")
                paths.setdefault("incremental_logs", []).append(str(p_inc))
                paths.setdefault("reference_logs", []).append(str(p_ref))
                paths.setdefault("checkpoints", []).append(str(ckpt))
            if on_step is not None:
                on_step(k, model, step_teacher, memory)
            log.debug("step %d: accuracy %.4f", k, np.mean(inc_logs[k].true_labels == inc_logs[k].predicted_labels))

        stage = "metrics"
        report = compute_metric_report(inc_logs, ref_logs, schedule)
        if out is not None:
            write_metric_report(report, out / "metrics.csv")
            write_metric_trace(report, out / "metrics_trace.csv")
            paths["metrics"] = str(out / "metrics.csv")
            paths["metrics_trace"] = str(out / "metrics_trace.csv")
            (out / "INCOMPLETE").unlink()
    except ExperimentError:
        raise
    except (MedicError, ValueError, OSError) as exc:
        raise ExperimentError(stage, str(exc)) from exc
    return ExperimentReport(report, cfg.to_dict(), paths, mem_sizes)


def run_ablation(
    cfg: ExperimentConfig,
    output_dir=None,
    variants: Optional[dict] = None,
    include_baseline: bool = False,
    reference_cache: Optional[dict] = None,
) -> dict[str, ExperimentReport]:
    """Run each method variant with otherwise identical settings."""
    variants = dict(VARIANTS if variants is None else variants)
    if include_baseline:
        variants = {"Baseline": BASELINE, **variants}
    cache = {} if reference_cache is None else reference_cache
    out = Path(output_dir or cfg.output_dir) if (output_dir or cfg.output_dir) else None
    reports = {}
    for name, overrides in variants.items():
        vcfg = cfg.replace(**overrides)
        vdir = out / _slug(name) if out is not None else None
        reports[name] = run_experiment(vcfg, vdir, cache)
    if out is not None:
        rows = [((name,), rep.metrics) for name, rep in reports.items()]
        atomic_write_text(out / "ablation.csv", report_csv_text(rows, ("method",)))
    return reports


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name).strip("_").lower()


def compute_report(log_directory) -> MetricReport:
    """Recompute every metric from the files of a run directory."""
    d = Path(log_directory)
    tpath = d / "task_configuration.json"
    if not tpath.exists():
        raise LogParseError(tpath, None, "file not found")
    schedule = build_schedule(TaskConfiguration.load(tpath))
    inc, ref = {}, {}
    for k in range(1, schedule.n_steps + 1):
        seen = schedule.seen_classes(k)
        inc[k] = read_prediction_log(d / "logs" / f"incremental_step{k}.csv", k, seen)
        ref[k] = read_prediction_log(d / "logs" / f"reference_step{k}.csv", k, seen)
    return compute_metric_report(inc, ref, schedule)
