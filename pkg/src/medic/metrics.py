"""Incremental-learning evaluation metrics.

Accuracy-based measures (overall accuracy, average task accuracy, forgetting
F, intransigence I) are computed from an accuracy matrix; the sample
dynamics measures (SDF, SDI) instead count individual test samples that a
reference model places on the correct side of the old/new class boundary
but the incremental model moves across it.

Steps and groups are numbered from 1 throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .tasks import TaskSchedule


class DegenerateTermWarning(UserWarning):
    """A sample-dynamics term had an empty denominator and was set to 0."""


@dataclass
class PredictionLog:
    model_step: int
    sample_ids: np.ndarray
    true_labels: np.ndarray
    predicted_labels: np.ndarray
    class_universe: tuple = ()

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.predicted_labels = np.asarray(self.predicted_labels, dtype=np.int64)
        n = len(self.sample_ids)
        if len(self.true_labels) != n or len(self.predicted_labels) != n:
            raise InputError("prediction log columns are not aligned")
        if len(np.unique(self.sample_ids)) != n:
            raise InputError("sample ids in a prediction log must be unique")
        self.class_universe = tuple(int(c) for c in self.class_universe)
        if self.class_universe and n:
            bad = ~np.isin(self.predicted_labels, self.class_universe)
            if bad.any():
                raise InputError(f"prediction {self.predicted_labels[bad][0]} outside the class universe")

    def __len__(self):
        return len(self.sample_ids)

    def sorted(self) -> "PredictionLog":
        order = np.argsort(self.sample_ids, kind="stable")
        return PredictionLog(
            self.model_step,
            self.sample_ids[order],
            self.true_labels[order],
            self.predicted_labels[order],
            self.class_universe,
        )


def overall_accuracy(log: PredictionLog) -> float:
    if len(log) == 0:
        raise InputError("empty prediction log")
    return float(np.mean(log.true_labels == log.predicted_labels))


def _step_logs(logs) -> dict[int, PredictionLog]:
    if isinstance(logs, Mapping):
        return dict(logs)
    return {i + 1: log for i, log in enumerate(logs)}


def accuracy_matrix(logs, schedule: TaskSchedule) -> np.ndarray:
    """``a[l-1, j-1]`` is the step-l accuracy on group j (NaN above the diagonal)."""
    logs = _step_logs(logs)
    T = schedule.n_steps
    a = np.full((T, T), np.nan)
    for l in range(1, T + 1):
        if l not in logs:
            raise InputError(f"missing prediction log for step {l}")
        log = logs[l]
        for j in range(1, l + 1):
            mask = np.isin(log.true_labels, schedule.new_classes(j))
            if mask.any():
                a[l - 1, j - 1] = np.mean(log.predicted_labels[mask] == log.true_labels[mask])
    return a


def average_task_accuracy(a: np.ndarray, k: int) -> float:
    return float(np.mean(a[k - 1, :k]))


def forgetting_F(a: np.ndarray, k: int) -> float:
    """Mean over past groups of (best earlier accuracy - accuracy at step k)."""
    if k < 2:
        raise InputError("forgetting needs k >= 2")
    drops = [np.max(a[j - 1 : k - 1, j - 1]) - a[k - 1, j - 1] for j in range(1, k)]
    return float(np.mean(drops))


def intransigence_I(a: np.ndarray, reference_acc: Mapping[int, float], k: int) -> float:
    if k not in reference_acc:
        raise InputError(f"no reference accuracy for group {k}")
    return float(reference_acc[k] - a[k - 1, k - 1])


def _aligned(log_M: PredictionLog, log_R: PredictionLog):
    M, R = log_M.sorted(), log_R.sorted()
    if not np.array_equal(M.sample_ids, R.sample_ids):
        raise InputError("incremental and reference logs cover different samples")
    if not np.array_equal(M.true_labels, R.true_labels):
        raise InputError("incremental and reference logs disagree on true labels")
    return M.true_labels, R.predicted_labels, M.predicted_labels


def _sd_term(log_M, log_R, schedule, j, swap):
    if j < 2:
        raise InputError("sample-dynamics terms start at j = 2")
    old = schedule.old_classes(j)
    new = schedule.new_classes(j)
    stay, cross = (new, old) if swap else (old, new)
    y, yr, ym = _aligned(log_M, log_R)
    den = np.isin(y, stay) & np.isin(yr, stay)
    n_den = int(den.sum())
    if n_den == 0:
        kind = "i" if swap else "f"
        warnings.warn(f"{kind}-term for group {j} has an empty denominator; using 0", DegenerateTermWarning, stacklevel=3)
        return 0.0
    return float((den & np.isin(ym, cross)).sum() / n_den)


def sd_f_term(log_M: PredictionLog, log_R: PredictionLog, schedule: TaskSchedule, j: int) -> float:
    """Share of old-class samples the reference keeps old but the model calls new."""
    return _sd_term(log_M, log_R, schedule, j, swap=False)


def sd_i_term(log_M: PredictionLog, log_R: PredictionLog, schedule: TaskSchedule, j: int) -> float:
    """Share of new-class samples the reference keeps new but the model calls old."""
    return _sd_term(log_M, log_R, schedule, j, swap=True)


def sdf(terms: Sequence[float]) -> float:
    """SDF_k from the terms f_{k,2..k}; the sum is divided by k, not k-1."""
    k = len(terms) + 1
    if k < 2:
        raise InputError("SDF needs k >= 2")
    return float(np.sum(terms) / k)


sdi = sdf


def sd_normalized(terms: Sequence[float]) -> float:
    """Plain mean of the terms (divisor k-1). Reported separately, never substituted."""
    if len(terms) == 0:
        raise InputError("need at least one term")
    return float(np.mean(terms))


def sd_averages(sdf_trace: Sequence[float], sdi_trace: Sequence[float]) -> tuple[float, float]:
    """Means of SDF_k and SDI_k over k = 2..T."""
    if len(sdf_trace) == 0 or len(sdi_trace) == 0:
        raise InputError("need at least one step k >= 2")
    return float(np.mean(sdf_trace)), float(np.mean(sdi_trace))


REPORT_COLUMNS = ("accuracy", "A", "F", "I", "SDF", "SDI", "SDF_avg", "SDI_avg")
TRACE_COLUMNS = ("step", "accuracy", "A", "F", "I", "SDF", "SDI", "SDF_norm", "SDI_norm")


@dataclass
class MetricReport:
    accuracy: float
    A: float
    F: float
    I: float
    SDF: float
    SDI: float
    SDF_avg: float
    SDI_avg: float
    # divisor k-1 variants of the final-step SDF/SDI
    SDF_norm: float = float("nan")
    SDI_norm: float = float("nan")
    traces: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_COLUMNS}


def compute_metric_report(incremental_logs, reference_logs, schedule: TaskSchedule) -> MetricReport:
    """All metrics from per-step incremental and reference prediction logs."""
    inc = _step_logs(incremental_logs)
    ref = _step_logs(reference_logs)
    T = schedule.n_steps
    a = accuracy_matrix(inc, schedule)
    ref_acc = {}
    for k in range(1, T + 1):
        if k not in ref:
            raise InputError(f"missing reference log for step {k}")
        r = ref[k]
        mask = np.isin(r.true_labels, schedule.new_classes(k))
        ref_acc[k] = float(np.mean(r.predicted_labels[mask] == r.true_labels[mask])) if mask.any() else float("nan")

    nan = float("nan")
    tr = {name: [] for name in TRACE_COLUMNS}
    for k in range(1, T + 1):
        tr["step"].append(k)
        tr["accuracy"].append(overall_accuracy(inc[k]))
        tr["A"].append(average_task_accuracy(a, k))
        tr["F"].append(forgetting_F(a, k) if k >= 2 else nan)
        tr["I"].append(intransigence_I(a, ref_acc, k))
        if k >= 2:
            f_terms = [sd_f_term(inc[k], ref[k], schedule, j) for j in range(2, k + 1)]
            i_terms = [sd_i_term(inc[k], ref[k], schedule, j) for j in range(2, k + 1)]
            tr["SDF"].append(sdf(f_terms))
            tr["SDI"].append(sdi(i_terms))
            tr["SDF_norm"].append(sd_normalized(f_terms))
            tr["SDI_norm"].append(sd_normalized(i_terms))
        else:
            for name in ("SDF", "SDI", "SDF_norm", "SDI_norm"):
                tr[name].append(nan)

    if T >= 2:
        sdf_avg, sdi_avg = sd_averages(tr["SDF"][1:], tr["SDI"][1:])
    else:
        sdf_avg = sdi_avg = nan
    return MetricReport(
        accuracy=float(np.mean(tr["accuracy"])),
        A=tr["A"][-1],
        F=tr["F"][-1],
        I=tr["I"][-1],
        SDF=tr["SDF"][-1],
        SDI=tr["SDI"][-1],
        SDF_avg=sdf_avg,
        SDI_avg=sdi_avg,
        SDF_norm=tr["SDF_norm"][-1],
        SDI_norm=tr["SDI_norm"][-1],
        traces=tr,
    )
