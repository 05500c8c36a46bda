"""Class-incremental learning with entropy-regularized distillation and
DropOut Sampling, plus sample-dynamics forgetting/intransigence metrics."""

from .errors import ConfigurationError, ExperimentError, InputError, LogParseError, MedicError
from .losses import LossBreakdown, ObjectiveConfig, cross_entropy, entropy, group_softmax, mer_distill, total_objective
from .metrics import MetricReport, PredictionLog, compute_metric_report
from .nncore import (
    ClassifierModel,
    LayerSpec,
    OptimizerState,
    TeacherSnapshot,
    expand_head,
    forward,
    init_model,
    mlp_arch,
    snapshot,
    softmax,
    train_step,
)
from .sampling import AnnotatedBatch, ExemplarMemory, Sample, balanced_set, dos_filter, rebalance_memory, reserve_memory
from .tasks import TaskConfiguration, TaskSchedule, build_schedule, random_configuration, sorted_configuration

__version__ = "0.1.0"
