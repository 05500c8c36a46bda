"""Command line entry point: ``medic {gen-data,run,metrics,tasks}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import MedicError
from .harness.config import VARIANTS, ExperimentConfig
from .harness.data import Dataset, generate_blobs, write_dataset_csv
from .harness.experiment import BASELINE, compute_report, derive_seed, load_data, resolve_configuration, run_ablation, run_experiment
from .harness.files import atomic_write_text, report_csv_text
from .tasks import random_configuration, sorted_configuration


def _gen_data(args):
    train, test = generate_blobs(args.n_classes, args.samples_per_class, args.dim, args.separation, args.seed)
    data = Dataset.concat([train, test])
    order = data.ids.argsort()
    write_dataset_csv(data.subset(order), args.out)
    print(f"wrote {len(data)} samples to {args.out}")


# (flag, dotted config path, type) for `run` overrides
_RUN_FLAGS = [
    ("--epochs", "epochs", int),
    ("--reference-epochs", "reference_epochs", int),
    ("--memory-budget", "memory_budget", int),
    ("--group-size", "tasks.group_size", int),
    ("--task-mode", "tasks.mode", str),
    ("--pinned-tasks", "tasks.pinned_path", str),
    ("--data-csv", "data.csv_path", str),
    ("--n-classes", "data.n_classes", int),
    ("--samples-per-class", "data.samples_per_class", int),
    ("--dim", "data.dim", int),
    ("--separation", "data.separation", float),
    ("--alpha", "objective.alpha", float),
    ("--temperature", "objective.temperature", float),
    ("--dos-k", "dos.K", int),
    ("--lr", "optimizer.learning_rate", float),
    ("--momentum", "optimizer.momentum", float),
    ("--batch-size", "optimizer.batch_size", int),
    ("--finetune-fraction", "finetune.epoch_fraction", float),
    ("--finetune-lr-multiplier", "finetune.lr_multiplier", float),
]


def _resolve_run_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {"seed": args.seed}
    for flag, path, _ in _RUN_FLAGS:
        value = getattr(args, flag.lstrip("-").replace("-", "_"))
        if value is not None:
            overrides[path] = value
    if args.data_csv:
        overrides["data.source"] = "csv"
    if args.no_mer:
        overrides["objective.mer_enabled"] = False
    if args.no_dos:
        overrides["dos.enabled"] = False
    if args.dos_clamp:
        overrides["dos.clamp"] = True
    if args.no_finetune:
        overrides["finetune.enabled"] = False
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    return cfg.replace(**overrides)


def _run(args):
    cfg = _resolve_run_config(args)
    if not cfg.output_dir:
        raise MedicError("an output directory is required (--output-dir or output_dir in the config)")
    if args.ablation:
        reports = run_ablation(cfg, include_baseline=args.baseline)
        rows = [((name,), rep.metrics) for name, rep in reports.items()]
        sys.stdout.write(report_csv_text(rows, ("method",)))
    else:
        rep = run_experiment(cfg.replace(**BASELINE) if args.baseline else cfg)
        sys.stdout.write(report_csv_text([((), rep.metrics)]))


def _metrics(args):
    rep = compute_report(args.log_dir)
    text = report_csv_text([((), rep)])
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)


def _tasks(args):
    if args.mode == "random":
        if args.n_classes is None:
            raise MedicError("--n-classes is required for random configurations")
        tcfg = random_configuration(args.n_classes, args.group_size, args.seed)
    elif args.accuracies:
        acc = {int(k): float(v) for k, v in json.loads(Path(args.accuracies).read_text()).items()}
        tcfg = sorted_configuration(acc, args.group_size, args.mode)
    else:
        cfg = (ExperimentConfig.load(args.config) if args.config else ExperimentConfig()).replace(
            **{"seed": args.seed, "tasks.mode": args.mode, "tasks.group_size": args.group_size}
        )
        train, test = load_data(cfg)
        tcfg = resolve_configuration(cfg, train, test)
    if args.out:
        tcfg.save(args.out)
    print(tcfg.to_json())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medic", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic Gaussian-blob dataset CSV")
    g.add_argument("--n-classes", type=int, default=10)
    g.add_argument("--samples-per-class", type=int, default=100)
    g.add_argument("--dim", type=int, default=16)
    g.add_argument("--separation", type=float, default=1.0)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen_data)

    r = sub.add_parser("run", help="run an incremental-learning experiment")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--output-dir")
    for flag, _, typ in _RUN_FLAGS:
        r.add_argument(flag, type=typ)
    r.add_argument("--no-mer", action="store_true", help="plain distillation without the entropy term")
    r.add_argument("--no-dos", action="store_true", help="disable DropOut Sampling")
    r.add_argument("--dos-clamp", action="store_true", help="always keep at least one new-class sample")
    r.add_argument("--no-finetune", action="store_true")
    r.add_argument("--ablation", action="store_true", help="run all four MER/DOS variants")
    r.add_argument("--baseline", action="store_true", help="memory-only baseline (alone, or added to --ablation)")
    r.set_defaults(func=_run)

    m = sub.add_parser("metrics", help="recompute the metric report of a run directory")
    m.add_argument("log_dir")
    m.add_argument("--out")
    m.set_defaults(func=_metrics)

    t = sub.add_parser("tasks", help="emit a task configuration")
    t.add_argument("--mode", choices=["random", "best_first", "worst_first"], default="random")
    t.add_argument("--n-classes", type=int)
    t.add_argument("--group-size", type=int, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--accuracies", help="JSON map class -> reference accuracy (sorted modes)")
    t.add_argument("--config", help="experiment config used to train the reference (sorted modes)")
    t.add_argument("--out")
    t.set_defaults(func=_tasks)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except MedicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
