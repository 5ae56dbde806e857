"""Network assembly, training with early stopping, and inference.

Three architectures are built here.  The convolutional classifier with the
128-to-1024 filter ramp takes a width-scale knob so desk-scale runs can train
a proportionally narrower copy of the same topology; the other two are fixed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, asdict, field

import numpy as np

from .checkpoint import Checkpoint
from . import classical
from .nn import (
    AdamState,
    BatchNorm1D,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    GlobalAveragePool,
    LSTM,
    MaxPool1D,
    Network,
    ReLU,
    adam_step,
    softmax,
    softmax_xent,
)

__all__ = [
    "ModelSpec",
    "TrainConfig",
    "TrainingDiverged",
    "NEURAL_ARCHITECTURES",
    "CLASSICAL_ARCHITECTURES",
    "build_simple_cnn",
    "build_lstm_net",
    "build_ecg_lens",
    "build_model_spec",
    "instantiate",
    "train",
    "predict",
]

NUM_CLASSES = 5
INPUT_SHAPE = (1000, 12)
NEURAL_ARCHITECTURES = ("ecg_lens", "lstm_net", "simple_cnn")
CLASSICAL_ARCHITECTURES = ("random_forest", "decision_tree", "logistic")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class ModelSpec:
    """Architecture tag plus an ordered layer description list."""

    architecture: str
    layers: tuple[dict, ...]
    n_classes: int = NUM_CLASSES
    input_shape: tuple[int, int] = INPUT_SHAPE
    width_scale: float = 1.0

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "layers": [dict(layer) for layer in self.layers],
            "n_classes": self.n_classes,
            "input_shape": list(self.input_shape),
            "width_scale": self.width_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            architecture=d["architecture"],
            layers=tuple(dict(layer) for layer in d["layers"]),
            n_classes=d["n_classes"],
            input_shape=tuple(d["input_shape"]),
            width_scale=d["width_scale"],
        )


def _scaled(width: int, scale: float) -> int:
    return max(1, int(round(width * scale)))


def build_simple_cnn() -> ModelSpec:
    """Two conv/pool stages, one hidden dense layer, dropout 0.5."""
    return ModelSpec(architecture="simple_cnn", layers=(
        {"kind": "conv1d", "filters": 32, "kernel_size": 7},
        {"kind": "relu"},
        {"kind": "maxpool"},
        {"kind": "conv1d", "filters": 64, "kernel_size": 5},
        {"kind": "relu"},
        {"kind": "maxpool"},
        {"kind": "flatten"},
        {"kind": "dense", "units": 128},
        {"kind": "relu"},
        {"kind": "dropout", "rate": 0.5},
        {"kind": "dense", "units": NUM_CLASSES},
    ))


def build_lstm_net() -> ModelSpec:
    """Two stacked LSTMs with batch norm between, dropout 0.3, dense head."""
    return ModelSpec(architecture="lstm_net", layers=(
        {"kind": "lstm", "hidden": 64, "return_sequences": True},
        {"kind": "batchnorm"},
        {"kind": "lstm", "hidden": 64, "return_sequences": False},
        {"kind": "dropout", "rate": 0.3},
        {"kind": "dense", "units": 64},
        {"kind": "relu"},
        {"kind": "dense", "units": NUM_CLASSES},
    ))


def build_ecg_lens(width_scale: float = 1.0) -> ModelSpec:
    """Four conv/batchnorm/relu/pool blocks with doubling filter counts
    (128 to 1024 at full width), global average pooling, and two dense layers
    each followed by dropout 0.4.  Pooling floors odd lengths, giving block
    output lengths 500/250/125/62."""
    layers: list[dict] = []
    for filters in (128, 256, 512, 1024):
        layers += [
            {"kind": "conv1d", "filters": _scaled(filters, width_scale),
             "kernel_size": 7},
            {"kind": "batchnorm"},
            {"kind": "relu"},
            {"kind": "maxpool", "allow_odd": True},
        ]
    layers += [
        {"kind": "gap"},
        {"kind": "dense", "units": _scaled(512, width_scale)},
        {"kind": "relu"},
        {"kind": "dropout", "rate": 0.4},
        {"kind": "dense", "units": _scaled(128, width_scale)},
        {"kind": "relu"},
        {"kind": "dropout", "rate": 0.4},
        {"kind": "dense", "units": NUM_CLASSES},
    ]
    return ModelSpec(architecture="ecg_lens", layers=tuple(layers),
                     width_scale=width_scale)


def build_model_spec(architecture: str, width_scale: float = 1.0) -> ModelSpec:
    if architecture == "simple_cnn":
        return build_simple_cnn()
    if architecture == "lstm_net":
        return build_lstm_net()
    if architecture == "ecg_lens":
        return build_ecg_lens(width_scale)
    raise ValueError(f"unknown neural architecture {architecture!r}")


def instantiate(spec: ModelSpec, rng: np.random.Generator,
                dtype=np.float32) -> Network:
    """Materialize a spec into layers, inferring every intermediate shape."""
    length, channels = spec.input_shape
    flat: int | None = None  # set once the stream is (batch, features)
    layers = []
    for desc in spec.layers:
        kind = desc["kind"]
        if kind == "conv1d":
            if flat is not None:
                raise ValueError("conv1d after the stream was flattened")
            layers.append(Conv1D(desc["kernel_size"], channels, desc["filters"],
                                 rng, dtype=dtype))
            channels = desc["filters"]
        elif kind == "maxpool":
            layers.append(MaxPool1D(allow_odd=desc.get("allow_odd", False)))
            length //= 2
        elif kind == "batchnorm":
            layers.append(BatchNorm1D(channels if flat is None else flat,
                                      dtype=dtype))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "dropout":
            layers.append(Dropout(desc["rate"]))
        elif kind == "flatten":
            layers.append(Flatten())
            flat = length * channels
        elif kind == "gap":
            layers.append(GlobalAveragePool())
            flat = channels
        elif kind == "dense":
            if flat is None:
                raise ValueError("dense layer needs a flattened stream")
            layers.append(Dense(flat, desc["units"], rng, dtype=dtype))
            flat = desc["units"]
        elif kind == "lstm":
            if flat is not None:
                raise ValueError("lstm after the stream was flattened")
            layers.append(LSTM(channels, desc["hidden"], rng,
                               return_sequences=desc["return_sequences"],
                               dtype=dtype))
            if desc["return_sequences"]:
                channels = desc["hidden"]
            else:
                flat = desc["hidden"]
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    if flat != spec.n_classes:
        raise ValueError(
            f"architecture emits {flat} outputs, expected {spec.n_classes} logits")
    return Network(layers, dtype=dtype)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    precision: str = "single"
    stop_at_val_accuracy: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.precision not in ("single", "double"):
            raise ValueError("precision must be 'single' or 'double'")

    @property
    def dtype(self):
        return np.float32 if self.precision == "single" else np.float64


def _forward_batched(net: Network, x: np.ndarray, batch: int) -> np.ndarray:
    outs = [net.forward(x[i:i + batch], training=False)
            for i in range(0, x.shape[0], batch)]
    return np.concatenate(outs, axis=0)


def _eval_loss_acc(net: Network, x, targets, batch) -> tuple[float, float]:
    logits = _forward_batched(net, x, batch)
    loss, _ = softmax_xent(logits, targets.astype(logits.dtype))
    acc = float(np.mean(np.argmax(logits, 1) == np.argmax(targets, 1)))
    return loss, acc


def train(spec: ModelSpec, train_data, val_data, cfg: TrainConfig):
    """Mini-batch Adam with seeded shuffling and best-validation early stopping.

    ``train_data``/``val_data`` are (inputs, one-hot targets) pairs of
    normalized arrays.  After each epoch the validation loss is measured; the
    parameters of the best epoch are kept, and training stops once ``patience``
    epochs pass without improvement (patience 0 runs exactly one epoch).
    Returns the checkpoint and the per-epoch history.
    """
    x_train, y_train = train_data
    x_val, y_val = val_data
    n = x_train.shape[0]
    if n == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation sets must be non-empty")
    dtype = cfg.dtype
    x_train = np.asarray(x_train, dtype=dtype)
    x_val = np.asarray(x_val, dtype=dtype)
    rng = np.random.default_rng(cfg.seed)
    net = instantiate(spec, rng, dtype=dtype)
    params = net.params()
    adam = AdamState.for_params(params)

    history: list[dict] = []
    best_val = np.inf
    best_arrays: dict[str, np.ndarray] = {}
    epochs_since_best = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start:start + cfg.batch_size]
            xb = x_train[sel]
            yb = y_train[sel].astype(dtype)
            logits = net.forward(xb, training=True, rng=rng)
            loss, dlogits = softmax_xent(logits, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, batch_no)
            net.backward(dlogits)
            adam_step(params, net.grads(), adam, lr=cfg.lr)
            loss_sum += loss * len(sel)
            correct += int(np.sum(np.argmax(logits, 1) == np.argmax(yb, 1)))
        val_loss, val_acc = _eval_loss_acc(net, x_val, y_val, cfg.batch_size)
        history.append({
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "val_loss": val_loss,
            "train_acc": correct / n,
            "val_acc": val_acc,
        })
        if val_loss < best_val:
            best_val = val_loss
            best_arrays = {k: v.copy() for k, v in {**params, **net.state()}.items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if cfg.stop_at_val_accuracy is not None and val_acc >= cfg.stop_at_val_accuracy:
            break
        if epochs_since_best >= cfg.patience:
            break
    net.load_arrays(best_arrays)
    ckpt = Checkpoint(
        architecture=spec.architecture,
        model_spec=spec.to_dict(),
        tensors=best_arrays,
        history=history,
        meta={"train_config": asdict(cfg)},
    )
    return ckpt, history


def predict(ckpt: Checkpoint, x: np.ndarray, batch: int = 256) -> np.ndarray:
    """Class probabilities from a checkpoint, in inference mode.

    Neural checkpoints run in double precision with dropout off and batch-norm
    running statistics, so single-record and batched predictions agree.
    Classical checkpoints take flattened (n, 12000) features.
    """
    x = np.asarray(x)
    arch = ckpt.architecture
    if arch in CLASSICAL_ARCHITECTURES:
        return _predict_classical(ckpt, x)
    spec = ModelSpec.from_dict(ckpt.model_spec)
    net = instantiate(spec, np.random.default_rng(0), dtype=np.float64)
    net.load_arrays(ckpt.tensors)
    logits = _forward_batched(net, x.astype(np.float64), batch)
    return softmax(logits)


def _predict_classical(ckpt: Checkpoint, x: np.ndarray) -> np.ndarray:
    model = restore_classical(ckpt)
    if ckpt.architecture == "decision_tree":
        rows = [classical.predict_tree(model, row)[1] for row in x]
    elif ckpt.architecture == "random_forest":
        rows = [classical.predict_forest(model, row)[1] for row in x]
    else:
        rows = [classical.predict_logistic(model, row)[1] for row in x]
    return np.stack(rows)


def classical_checkpoint(architecture: str, model, params: dict,
                         history: list[dict] | None = None) -> Checkpoint:
    """Wrap a fitted classical model in the same container the networks use."""
    if architecture == "decision_tree":
        tensors = {f"tree.{k}": v for k, v in classical.tree_to_arrays(model).items()}
    elif architecture == "random_forest":
        tensors = {}
        for i, tree in enumerate(model.trees):
            for k, v in classical.tree_to_arrays(tree).items():
                tensors[f"tree{i}.{k}"] = v
        params = dict(params, n_trees=len(model.trees),
                      n_features_per_split=model.n_features_per_split,
                      seed=model.seed)
    elif architecture == "logistic":
        tensors = {"weights": model.weights, "biases": model.biases}
    else:
        raise ValueError(f"unknown classical architecture {architecture!r}")
    return Checkpoint(architecture=architecture,
                      model_spec={"architecture": architecture, "params": params},
                      tensors=tensors, history=history or [], meta={})


def restore_classical(ckpt: Checkpoint):
    arch = ckpt.architecture
    if arch == "decision_tree":
        arrays = {k.split(".", 1)[1]: v for k, v in ckpt.tensors.items()}
        return classical.tree_from_arrays(arrays)
    if arch == "random_forest":
        params = ckpt.model_spec["params"]
        trees = []
        for i in range(params["n_trees"]):
            prefix = f"tree{i}."
            arrays = {k[len(prefix):]: v for k, v in ckpt.tensors.items()
                      if k.startswith(prefix)}
            trees.append(classical.tree_from_arrays(arrays))
        return classical.ForestModel(
            trees=trees,
            n_features_per_split=params["n_features_per_split"],
            seed=params["seed"])
    if arch == "logistic":
        return classical.LogisticModel(
            weights=ckpt.tensors["weights"], biases=ckpt.tensors["biases"])
    raise ValueError(f"not a classical checkpoint: {arch!r}")
