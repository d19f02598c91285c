"""Adam optimization, the epoch loop, and per-branch evaluation.

Training is single-threaded with batch size 1. Evaluation can fan out
over samples across threads; results merge in sample order, so thread
count never changes the numbers. Determinism contract: model init seed,
a training seed for latent/dropout noise, and per-epoch shuffles seeded
with seed + epoch give identical histories across runs.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import GNetModel, gnet_forward, gnet_loss


class TrainingError(RuntimeError):
    """Optimization failed (non-finite loss or gradient)."""


@dataclass
class AdamState:
    """First/second moment estimates per parameter path, plus step count."""

    lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params, grads: dict[str, np.ndarray] | None = None) -> None:
    """One bias-corrected Adam update over every parameter in the store.

    ``grads`` defaults to the gradients accumulated on the parameters
    themselves. Moment buffers are created lazily on first use.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for path, value in params.items():
        g = value.grad if grads is None else grads[path]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {path!r}")
        m = state.m.get(path)
        if m is None:
            m = state.m[path] = np.zeros_like(value.data)
        v = state.v.get(path)
        if v is None:
            v = state.v[path] = np.zeros_like(value.data)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        value.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm.

    Returns the pre-clip norm. No-op when the norm is already within
    bounds or max_norm is not positive.
    """
    total = 0.0
    for _, value in params.items():
        total += float(np.sum(value.grad * value.grad))
    norm = float(np.sqrt(total))
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for _, value in params.items():
            value.grad *= scale
    return norm


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    clip: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0.0:
            raise ValueError(f"lr must be positive, got {self.lr}")


@dataclass(frozen=True)
class Metrics:
    """Evaluation result over one dataset; None per disabled branch."""

    num_samples: int
    loss: float
    recognition_accuracy: float | None
    prediction_accuracy: float | None
    confusion_recognition: np.ndarray | None
    confusion_prediction: np.ndarray | None


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    recognition_accuracy: float | None
    prediction_accuracy: float | None
    seconds: float


@dataclass(frozen=True)
class TrainResult:
    best_arrays: dict[str, np.ndarray]
    best_epoch: int
    best_val_accuracy: float | None
    history: tuple[EpochStats, ...]


def evaluate(model: GNetModel, dataset: Dataset, threads: int = 1) -> Metrics:
    """Eval-mode metrics: mean loss, per-branch accuracy and confusion.

    Confusion rows index the true class, columns the predicted class.
    """
    if len(dataset) == 0:
        raise ValueError("evaluate needs a nonempty dataset")
    c = model.config

    def one(sample):
        logp_r, logp_p, latent = gnet_forward(model, sample, mode="eval")
        loss = gnet_loss(
            logp_r,
            logp_p,
            (sample.recognition_label, sample.prediction_label),
            latent,
            kl_weight=c.kl_weight,
        ).item()
        pred_r = None if logp_r is None else int(np.argmax(logp_r.data[0]))
        pred_p = None if logp_p is None else int(np.argmax(logp_p.data[0]))
        return loss, pred_r, pred_p

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, dataset.samples))
    else:
        results = [one(s) for s in dataset.samples]

    n = len(dataset)
    total_loss = 0.0
    correct_r = correct_p = 0
    conf_r = np.zeros((c.num_classes, c.num_classes), dtype=np.int64)
    conf_p = np.zeros((c.num_classes, c.num_classes), dtype=np.int64)
    for sample, (loss, pred_r, pred_p) in zip(dataset.samples, results):
        total_loss += loss
        if pred_r is not None:
            conf_r[sample.recognition_label, pred_r] += 1
            correct_r += pred_r == sample.recognition_label
        if pred_p is not None:
            conf_p[sample.prediction_label, pred_p] += 1
            correct_p += pred_p == sample.prediction_label

    has_r = c.enable_recognition
    has_p = c.enable_prediction
    return Metrics(
        num_samples=n,
        loss=total_loss / n,
        recognition_accuracy=correct_r / n if has_r else None,
        prediction_accuracy=correct_p / n if has_p else None,
        confusion_recognition=conf_r if has_r else None,
        confusion_prediction=conf_p if has_p else None,
    )


def _selection_metric(metrics: Metrics) -> float:
    """Checkpoint selection score: validation recognition accuracy, or the
    prediction accuracy when the recognition branch is disabled."""
    if metrics.recognition_accuracy is not None:
        return metrics.recognition_accuracy
    return metrics.prediction_accuracy


def train(
    model: GNetModel,
    train_set: Dataset,
    val_set: Dataset,
    config: TrainConfig,
    log=None,
) -> TrainResult:
    """Optimize the model in place; returns history and the best weights.

    Best = highest validation selection metric, earlier epoch on ties.
    ``log``, when given, receives one formatted line per epoch.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation splits must be nonempty")
    adam = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    noise_rng = np.random.default_rng(config.seed)
    kl_weight = model.config.kl_weight

    best_arrays = model.params.arrays()
    best_epoch = 0
    best_metric: float | None = None
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        if config.shuffle:
            order = np.random.default_rng(config.seed + epoch).permutation(len(train_set))
        else:
            order = np.arange(len(train_set))

        epoch_loss = 0.0
        for idx in order:
            sample = train_set.samples[idx]
            model.params.zero_grad()
            logp_r, logp_p, latent = gnet_forward(model, sample, mode="train", rng=noise_rng)
            loss = gnet_loss(
                logp_r,
                logp_p,
                (sample.recognition_label, sample.prediction_label),
                latent,
                kl_weight=kl_weight,
            )
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"loss became non-finite at epoch {epoch}, sample {int(idx)}"
                )
            epoch_loss += value
            loss.backward()
            if config.clip > 0.0:
                clip_gradients(model.params, config.clip)
            adam_step(adam, model.params)

        val = evaluate(model, val_set)
        stats = EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / len(train_set),
            val_loss=val.loss,
            recognition_accuracy=val.recognition_accuracy,
            prediction_accuracy=val.prediction_accuracy,
            seconds=time.perf_counter() - started,
        )
        history.append(stats)
        if log is not None:
            log(format_epoch(stats))

        metric = _selection_metric(val)
        if best_metric is None or metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_arrays = model.params.arrays()

    return TrainResult(
        best_arrays=best_arrays,
        best_epoch=best_epoch,
        best_val_accuracy=best_metric,
        history=tuple(history),
    )


def format_epoch(stats: EpochStats) -> str:
    acc_r = "-" if stats.recognition_accuracy is None else f"{stats.recognition_accuracy:.4f}"
    acc_p = "-" if stats.prediction_accuracy is None else f"{stats.prediction_accuracy:.4f}"
    return (
        f"epoch {stats.epoch:4d}  train_loss {stats.train_loss:.6f}  "
        f"val_loss {stats.val_loss:.6f}  acc_R {acc_r}  acc_P {acc_p}  "
        f"({stats.seconds:.2f}s)"
    )


def write_history_csv(path, history) -> None:
    """One row per epoch: epoch,train_loss,val_loss,acc_R,acc_P.

    A disabled branch leaves its accuracy column empty.
    """
    def cell(x) -> str:
        return "" if x is None else repr(x)

    lines = ["epoch,train_loss,val_loss,acc_R,acc_P"]
    for s in history:
        lines.append(
            f"{s.epoch},{cell(s.train_loss)},{cell(s.val_loss)},"
            f"{cell(s.recognition_accuracy)},{cell(s.prediction_accuracy)}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_confusion(path, matrix: np.ndarray, label_names=()) -> None:
    """C x C integer table, one row per true class, tab-separated columns."""
    lines = []
    if label_names:
        lines.append("# classes: " + ", ".join(label_names))
    lines.append("# rows: true class; columns: predicted class")
    for row in matrix:
        lines.append("\t".join(str(int(x)) for x in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
