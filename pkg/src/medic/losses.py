"""Cross-entropy learning term plus entropy-regularized distillation.

The transfer term for each past class group compares the teacher's and the
student's softmax restricted to that group's logits. With the maximum
entropy regularizer enabled the per-sample loss is::

    sum_j (q_j - p_j) * log q_j  ==  CE(p, q) - H(q)

which rewards the student for staying uncertain where the teacher is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ObjectiveConfig:
    alpha: float = 1.0
    temperature: float = 1.0
    mer_enabled: bool = True

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigurationError("alpha must be non-negative")
        if not self.temperature > 0:
            raise ConfigurationError("temperature must be positive")


@dataclass
class LossBreakdown:
    total: float
    learn_term: float
    transfer_terms: list[float] = field(default_factory=list)
    entropy_values: list[float] = field(default_factory=list)
    # dL/dlogits for the batch; consumed by backprop
    logit_grad: Optional[np.ndarray] = field(default=None, repr=False)


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"distribution shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _safe_log(p):
    return np.log(np.maximum(p, LOG_FLOOR))


def cross_entropy(target, predicted) -> float:
    """-sum target * log(predicted), averaged over rows for 2-D input."""
    target, predicted = _check_pair(target, predicted)
    per_row = -(target * _safe_log(predicted)).sum(axis=-1)
    return float(np.mean(per_row))


def entropy(dist) -> float:
    dist = np.asarray(dist, dtype=np.float64)
    # 0 * log(0) -> 0 since the floored log is finite
    per_row = -(dist * _safe_log(dist)).sum(axis=-1)
    return float(np.mean(per_row))


def mer_distill(teacher, student) -> float:
    """sum_j (student_j - teacher_j) log student_j, batch-averaged."""
    teacher, student = _check_pair(teacher, student)
    per_row = ((student - teacher) * _safe_log(student)).sum(axis=-1)
    return float(np.mean(per_row))


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def group_softmax(logits, group) -> np.ndarray:
    """Softmax over the logits whose indices are in ``group`` (in that order)."""
    idx = np.asarray(list(group), dtype=np.int64)
    if idx.size == 0:
        raise InputError("class group must be non-empty")
    z = np.asarray(logits, dtype=np.float64)[..., idx]
    return np.exp(_log_softmax(z))


def total_objective(
    true_labels,
    student_logits,
    teacher_logits: Optional[np.ndarray],
    past_groups: Sequence[Sequence[int]],
    cfg: ObjectiveConfig,
) -> LossBreakdown:
    """Learning term plus ``alpha`` times the summed per-group transfer terms.

    ``true_labels`` is a one-hot (n, C) array over all seen classes.
    ``teacher_logits`` are the frozen teacher's outputs on the same batch;
    its columns must cover every index in ``past_groups``. The returned
    breakdown carries the exact gradient w.r.t. ``student_logits``.
    """
    y = np.asarray(true_labels, dtype=np.float64)
    z = np.asarray(student_logits, dtype=np.float64)
    if y.shape != z.shape or z.ndim != 2:
        raise InputError(f"label/logit shapes differ: {y.shape} vs {z.shape}")
    if past_groups and teacher_logits is None:
        raise ConfigurationError("past class groups given without a teacher")
    n = z.shape[0]

    log_q = _log_softmax(z)
    q = np.exp(log_q)
    learn = float(-(y * log_q).sum() / n)
    grad = (q - y) / n

    transfer, entropies = [], []
    for group in past_groups:
        idx = np.asarray(list(group), dtype=np.int64)
        if idx.size == 0:
            raise InputError("class group must be non-empty")
        log_qg = _log_softmax(z[:, idx])
        qg = np.exp(log_qg)
        pg = np.exp(_log_softmax(np.asarray(teacher_logits, dtype=np.float64)[:, idx] / cfg.temperature))
        h = -(qg * log_qg).sum(axis=1)
        entropies.append(float(h.mean()))
        if cfg.mer_enabled:
            value = float(((qg - pg) * log_qg).sum() / n)
            g = (qg - pg) + qg * (log_qg + h[:, None])
        else:
            value = float(-(pg * log_qg).sum() / n)
            g = qg - pg
        transfer.append(value)
        grad[:, idx] += cfg.alpha * g / n

    total = learn + cfg.alpha * sum(transfer)
    return LossBreakdown(total, learn, transfer, entropies, grad)
