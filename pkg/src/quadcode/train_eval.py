"""Mini-batch training with early stopping, and exact evaluation metrics.

Everything downstream of (seed, data, config) is deterministic: epoch
shuffles and per-example dropout masks come from counter-based streams
keyed by (epoch) and (step, example position), gradient accumulation runs
in example order, and evaluation consumes no randomness at all. Thread
count changes nothing but wall time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _parallel, rng
from .errors import InputError, QuadcodeError
from .models import Model, batch_loss, predict
from .tensor_nn.optim import make_optimizer
from .text_encoding import EncodedExample


class EmptyDatasetError(InputError):
    def __init__(self, which: str):
        super().__init__(f"{which} dataset has no examples")
        self.which = which


class NonFiniteLossError(QuadcodeError):
    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at optimizer step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 30
    patience: int = 5
    shuffle: bool = True
    optimizer: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise InputError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 0:
            raise InputError(f"patience must be >= 0, got {self.patience}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    dev_accuracy: float


@dataclass(frozen=True)
class Metrics:
    """Confusion counts plus the derived headline numbers.

    confusion[i, j] counts examples of true class i predicted as j, so row
    sums are true-class counts and accuracy is trace/total.
    """

    confusion: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.confusion, dtype=np.int64)
        if c.shape != (4, 4) or (c < 0).any():
            raise QuadcodeError(f"confusion matrix must be 4x4 nonnegative counts, got {c.shape}")
        object.__setattr__(self, "confusion", c)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    def _safe_div(self, num: np.ndarray, den: np.ndarray) -> np.ndarray:
        out = np.zeros(4, dtype=np.float64)
        np.divide(num, den, out=out, where=den > 0)
        return out

    @property
    def precision(self) -> np.ndarray:
        diag = np.diag(self.confusion).astype(np.float64)
        return self._safe_div(diag, self.confusion.sum(axis=0).astype(np.float64))

    @property
    def recall(self) -> np.ndarray:
        diag = np.diag(self.confusion).astype(np.float64)
        return self._safe_div(diag, self.confusion.sum(axis=1).astype(np.float64))

    def to_json_obj(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": [float(x) for x in self.precision],
            "recall": [float(x) for x in self.recall],
            "confusion": self.confusion.tolist(),
            "total": self.total,
        }

    def lines(self, class_names: Sequence[str] | None = None) -> list[str]:
        names = list(class_names) if class_names is not None else [f"class{i}" for i in range(4)]
        width = max(len(n) for n in names)
        out = [f"accuracy {self.accuracy:.4f} over {self.total} examples"]
        for i, name in enumerate(names):
            out.append(
                f"  {name:<{width}}  precision {self.precision[i]:.4f}  recall {self.recall[i]:.4f}"
            )
        out.append("confusion (rows true, cols predicted):")
        for i, name in enumerate(names):
            cells = " ".join(f"{int(v):>6}" for v in self.confusion[i])
            out.append(f"  {name:<{width}} {cells}")
        return out


def evaluate(model: Model, test_set: Sequence[EncodedExample]) -> Metrics:
    """Dropout-off predictions over the whole set; exact counts."""
    if not test_set:
        raise EmptyDatasetError("test")
    preds = _parallel.ordered_map(lambda ex: predict(model, ex.indices)[0], list(test_set))
    confusion = np.zeros((4, 4), dtype=np.int64)
    for example, pred in zip(test_set, preds):
        confusion[example.label, pred] += 1
    return Metrics(confusion)


def train(
    model: Model,
    train_set: Sequence[EncodedExample],
    dev_set: Sequence[EncodedExample],
    config: TrainConfig,
) -> tuple[Model, list[EpochStats]]:
    """Train in place; returns (model restored to its best dev epoch, history).

    Early stopping: training stops once dev accuracy has failed to improve
    for more than `patience` consecutive epochs, and the parameters from the
    best epoch are restored before returning.
    """
    if not train_set:
        raise EmptyDatasetError("train")
    if not dev_set:
        raise EmptyDatasetError("dev")
    train_set = list(train_set)
    dev_set = list(dev_set)
    params = model.parameters()
    optimizer = make_optimizer(
        params, config.optimizer, lr=config.lr, momentum=config.momentum,
        beta1=config.beta1, beta2=config.beta2, eps=config.eps,
    )
    n = len(train_set)
    history: list[EpochStats] = []
    best_accuracy = -1.0
    best_values: list[np.ndarray] | None = None
    wait = 0
    step = 0
    for epoch in range(1, config.epochs + 1):
        if config.shuffle:
            order = rng.stream(config.seed, rng.SHUFFLE, epoch).permutation(n)
        else:
            order = np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            gens = [rng.stream(config.seed, rng.DROPOUT, step, j) for j in range(len(batch))]
            loss = batch_loss(model, batch, training=True, dropout_rngs=gens, accumulate=True)
            if not math.isfinite(loss):
                raise NonFiniteLossError(step)
            optimizer.step()
            epoch_loss += loss * len(batch)
            step += 1
        dev_accuracy = evaluate(model, dev_set).accuracy
        history.append(EpochStats(epoch, epoch_loss / n, dev_accuracy))
        if dev_accuracy > best_accuracy:
            best_accuracy = dev_accuracy
            best_values = [p.value.copy() for p in params]
            wait = 0
        else:
            wait += 1
            if wait > config.patience:
                break
    if best_values is not None:
        for p, value in zip(params, best_values):
            p.value[...] = value
    return model, history


def write_history(history: Sequence[EpochStats], path: str | Path) -> None:
    """JSONL, one epoch per line with fixed key order."""
    with open(path, "w", encoding="utf-8") as fh:
        for h in history:
            obj = {"epoch": h.epoch, "train_loss": h.train_loss, "dev_accuracy": h.dev_accuracy}
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def read_history(path: str | Path) -> list[EpochStats]:
    out = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            out.append(EpochStats(obj["epoch"], obj["train_loss"], obj["dev_accuracy"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"history line {line_no}: {exc}") from None
    return out
