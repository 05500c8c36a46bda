from .config import VARIANTS, ExperimentConfig
from .data import Dataset, generate_blobs, read_dataset_csv, write_dataset_csv
from .experiment import (
    BASELINE,
    ExperimentReport,
    compute_report,
    derive_seed,
    run_ablation,
    run_experiment,
    train_reference,
)
from .files import read_prediction_log, write_metric_report, write_prediction_log

__all__ = [
    "BASELINE",
    "VARIANTS",
    "Dataset",
    "ExperimentConfig",
    "ExperimentReport",
    "compute_report",
    "derive_seed",
    "generate_blobs",
    "read_dataset_csv",
    "read_prediction_log",
    "run_ablation",
    "run_experiment",
    "train_reference",
    "write_dataset_csv",
    "write_metric_report",
    "write_prediction_log",
]
