"""Accuracy, convergence improvement, convergence epochs and confusion counts.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from lcqhnn.dataclass import ConfusionMatrix, RunRecord
from lcqhnn.datasets import LabeledImages
from lcqhnn.models import Model, model_forward

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Percentage of predictions equal to their labels, over all samples.

    Raises:
        ValueError: If the inputs are empty or differ in length
    """
    pred = np.asarray(predictions)
    true = np.asarray(labels)
    if pred.shape != true.shape:
        raise ValueError(f"{pred.size} predictions for {true.size} labels")
    if pred.size == 0:
        raise ValueError("accuracy of an empty sample set is undefined")
    return 100.0 * int(np.sum(pred == true)) / pred.size


def convergence_improvement(epochs_a: int, epochs_b: int) -> float:
    """Relative reduction in epochs-to-convergence of A versus B: 100 * (E_B - E_A) / E_B.

    Negative when A converges more slowly.

    Raises:
        ValueError: If either epoch count is below 1
    """
    if epochs_a < 1 or epochs_b < 1:
        raise ValueError(f"epoch counts must be >= 1, got {epochs_a} and {epochs_b}")
    return 100.0 * (epochs_b - epochs_a) / epochs_b


def convergence_epoch(record: RunRecord, threshold: float) -> Optional[int]:
    """First epoch whose validation accuracy is at least ``threshold`` percent, or None."""
    if not 0.0 < threshold <= 100.0:
        raise ValueError(f"threshold must lie in (0, 100], got {threshold}")
    for row in record.epochs:
        if row.val_acc >= threshold:
            return row.epoch
    return None


def predict(model: Model, pixels: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Eval-mode class predictions: argmax of the logits, ties toward class 0."""
    out = []
    for start in range(0, pixels.shape[0], batch_size):
        logits, _ = model_forward(model, pixels[start:start + batch_size], training=False)
        out.append(np.argmax(logits, axis=-1))
    if not out:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(out).astype(np.int64)


def evaluate_accuracy(model: Model, split: LabeledImages) -> float:
    return accuracy(predict(model, split.pixels), split.labels)


def confusion_from_predictions(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    pred = np.asarray(predictions)
    true = np.asarray(labels)
    return ConfusionMatrix(
        tp=int(np.sum((pred == 1) & (true == 1))),
        tn=int(np.sum((pred == 0) & (true == 0))),
        fp=int(np.sum((pred == 1) & (true == 0))),
        fn=int(np.sum((pred == 0) & (true == 1))),
    )


def confusion(model: Model, split: LabeledImages) -> ConfusionMatrix:
    """Confusion counts of the model on a split; class 1 is positive."""
    matrix = confusion_from_predictions(predict(model, split.pixels), split.labels)
    logger.debug("confusion %s", matrix.to_dict())
    return matrix
