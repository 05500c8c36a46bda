"""Small feed-forward classifier with hand-written backprop.

Everything runs in float64 so gradients can be checked against central
finite differences. The model keeps a single output head that grows as new
classes arrive; a frozen :class:`TeacherSnapshot` of an earlier model
provides the soft labels used for distillation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError
from .losses import LossBreakdown, ObjectiveConfig, total_objective

CHECKPOINT_VERSION = 1
ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError(f"layer dimensions must be positive: {self}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")


def mlp_arch(input_dim: int, hidden: Sequence[int], n_classes: int) -> list[LayerSpec]:
    """ReLU hidden layers followed by an identity (logit) layer."""
    dims = [input_dim, *hidden]
    arch = [LayerSpec(a, b, "relu") for a, b in zip(dims[:-1], dims[1:])]
    arch.append(LayerSpec(dims[-1], n_classes, "identity"))
    return arch


def _check_arch(arch: Sequence[LayerSpec]) -> None:
    if not arch:
        raise ConfigurationError("architecture must contain at least one layer")
    for i, (a, b) in enumerate(zip(arch[:-1], arch[1:])):
        if a.output_dim != b.input_dim:
            raise ConfigurationError(
                f"layer {i} outputs {a.output_dim} units but layer {i + 1} expects {b.input_dim}"
            )
    if arch[-1].activation != "identity":
        raise ConfigurationError("final layer must use the identity activation")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def _forward_layers(weights, biases, activations, x):
    """Return the list of layer outputs (post-activation), input first."""
    outs = [x]
    h = x
    for W, b, act in zip(weights, biases, activations):
        # einsum instead of BLAS: a row's logits must not depend on batch size
        h = np.einsum("ij,jk->ik", h, W) + b
        if act == "relu":
            h = np.maximum(h, 0.0)
        outs.append(h)
    return outs


@dataclass
class ClassifierModel:
    """Trainable MLP. ``weights[i]`` has shape (input_dim, output_dim)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]
    rng_seed: int = 0

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def arch(self) -> list[LayerSpec]:
        return [
            LayerSpec(W.shape[0], W.shape[1], act)
            for W, act in zip(self.weights, self.activations)
        ]

    def parameters(self) -> list[np.ndarray]:
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def forward(self, features) -> np.ndarray:
        return forward(self, features)

    def copy(self) -> "ClassifierModel":
        return ClassifierModel(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
            self.rng_seed,
        )

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.parameters())


@dataclass(frozen=True)
class TeacherSnapshot:
    """Read-only copy of a model's parameters."""

    weights: tuple
    biases: tuple
    activations: tuple
    step_index: int = 0

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, features) -> np.ndarray:
        x = _as_batch(features, self.weights[0].shape[0])
        return _forward_layers(self.weights, self.biases, self.activations, x)[-1]


@dataclass
class OptimizerState:
    """SGD with (heavy-ball) momentum: v <- mu*v + g ; w <- w - lr*v."""

    learning_rate: float = 0.05
    momentum: float = 0.9
    velocity: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("momentum must lie in [0, 1)")

    @classmethod
    def for_model(cls, model: ClassifierModel, learning_rate=0.05, momentum=0.9):
        return cls(learning_rate, momentum, [np.zeros_like(p) for p in model.parameters()])


def init_model(arch: Sequence[LayerSpec], seed: int) -> ClassifierModel:
    _check_arch(arch)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in arch:
        weights.append(_glorot(rng, layer.input_dim, layer.output_dim, (layer.input_dim, layer.output_dim)))
        biases.append(np.zeros(layer.output_dim))
    return ClassifierModel(weights, biases, [s.activation for s in arch], int(seed))


def _as_batch(features, input_dim: int) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise InputError(f"expected features of shape (n, {input_dim}), got {x.shape}")
    return x


def forward(model: ClassifierModel, features) -> np.ndarray:
    """Logits of shape (batch, n_classes)."""
    x = _as_batch(features, model.input_dim)
    return _forward_layers(model.weights, model.biases, model.activations, x)[-1]


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if np.isnan(z).any():
        raise InputError("softmax received NaN logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def backward(model: ClassifierModel, features, logit_grad: np.ndarray) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. parameters, given dL/dlogits."""
    x = _as_batch(features, model.input_dim)
    outs = _forward_layers(model.weights, model.biases, model.activations, x)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = np.asarray(logit_grad, dtype=np.float64)
    for i in range(len(model.weights) - 1, -1, -1):
        if model.activations[i] == "relu":
            delta = delta * (outs[i + 1] > 0)
        grads_w[i] = outs[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    return grads


def loss_and_grads(
    model: ClassifierModel,
    features,
    labels,
    cfg: ObjectiveConfig,
    teacher: Optional[TeacherSnapshot] = None,
    past_groups: Sequence[Sequence[int]] = (),
) -> tuple[LossBreakdown, list[np.ndarray]]:
    """Objective value and exact parameter gradients.

    ``labels`` are output-column indices; ``past_groups`` are column index
    sets of the previous tasks.
    """
    x = _as_batch(features, model.input_dim)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(x):
        raise InputError("features and labels differ in length")
    if len(x) == 0:
        raise InputError("mini-batch is empty")
    if past_groups and teacher is None:
        raise ConfigurationError("a teacher snapshot is required once old classes exist")
    logits = forward(model, x)
    onehot = np.zeros_like(logits)
    onehot[np.arange(len(labels)), labels] = 1.0
    teacher_logits = teacher.forward(x) if (teacher is not None and past_groups) else None
    breakdown = total_objective(onehot, logits, teacher_logits, past_groups, cfg)
    return breakdown, backward(model, x, breakdown.logit_grad)


def train_step(
    model: ClassifierModel,
    features,
    labels,
    cfg: ObjectiveConfig,
    opt: OptimizerState,
    teacher: Optional[TeacherSnapshot] = None,
    past_groups: Sequence[Sequence[int]] = (),
) -> LossBreakdown:
    """One SGD-with-momentum update in place; returns the pre-update loss."""
    breakdown, grads = loss_and_grads(model, features, labels, cfg, teacher, past_groups)
    params = model.parameters()
    if not opt.velocity:
        opt.velocity = [np.zeros_like(p) for p in params]
    if [v.shape for v in opt.velocity] != [p.shape for p in params]:
        raise ConfigurationError("optimizer buffers do not match the model parameters")
    for p, v, g in zip(params, opt.velocity, grads):
        v *= opt.momentum
        v += g
        p -= opt.learning_rate * v
    return breakdown


def snapshot(model: ClassifierModel, step_index: int = 0) -> TeacherSnapshot:
    def frozen(a):
        a = a.copy()
        a.setflags(write=False)
        return a

    return TeacherSnapshot(
        tuple(frozen(W) for W in model.weights),
        tuple(frozen(b) for b in model.biases),
        tuple(model.activations),
        step_index,
    )


def expand_head(model: ClassifierModel, n_new_classes: int, seed: int) -> ClassifierModel:
    """Copy of ``model`` whose output layer has ``n_new_classes`` extra units.

    Existing output columns are copied untouched, so old-class logits are
    bit-identical to the source model's.
    """
    if n_new_classes < 1:
        raise InputError("n_new_classes must be at least 1")
    out = model.copy()
    W, b = out.weights[-1], out.biases[-1]
    fan_in = W.shape[0]
    rng = np.random.default_rng(seed)
    W_new = _glorot(rng, fan_in, W.shape[1] + n_new_classes, (fan_in, n_new_classes))
    out.weights[-1] = np.concatenate([W, W_new], axis=1)
    out.biases[-1] = np.concatenate([b, np.zeros(n_new_classes)])
    return out


def save_checkpoint(model: ClassifierModel, path) -> None:
    path = Path(path)
    header = {
        "format_version": CHECKPOINT_VERSION,
        "n_classes": model.n_classes,
        "rng_seed": model.rng_seed,
        "layers": [
            {"input_dim": s.input_dim, "output_dim": s.output_dim, "activation": s.activation}
            for s in model.arch
        ],
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i}"] = np.ascontiguousarray(W)
        arrays[f"b{i}"] = b
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> ClassifierModel:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise InputError(f"{path}: unsupported checkpoint version {header.get('format_version')}")
        arch = [LayerSpec(**layer) for layer in header["layers"]]
        _check_arch(arch)
        weights = [data[f"W{i}"].copy() for i in range(len(arch))]
        biases = [data[f"b{i}"].copy() for i in range(len(arch))]
    model = ClassifierModel(weights, biases, [s.activation for s in arch], header["rng_seed"])
    if model.n_classes != header["n_classes"]:
        raise InputError(f"{path}: n_classes does not match the stored output layer")
    return model
