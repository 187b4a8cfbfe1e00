"""Mini-batch training with Adam, per-epoch validation and final test metrics.
"""

import logging
import math
import time
from typing import Callable, Optional, Tuple

import numpy as np
from tqdm.auto import tqdm

from lcqhnn.config import RunConfig
from lcqhnn.dataclass import EpochMetrics, RunRecord
from lcqhnn.datasets import DatasetSplit
from lcqhnn.errors import NumericalError, UsageError
from lcqhnn.layers import softmax_crossentropy
from lcqhnn.metrics import confusion, convergence_epoch, evaluate_accuracy
from lcqhnn.models import Model, ModelSpec, init_model, model_backward, model_forward
from lcqhnn.optimizer import AdamState, adam_step
from lcqhnn.utils import STREAM_DROPOUT, STREAM_SHUFFLE, make_rng

logger = logging.getLogger(__name__)

# Called with (model, epoch); epoch 0 is the untrained model.
CheckpointHook = Callable[[Model, int], None]


def _run_epoch(
    model: Model,
    split: DatasetSplit,
    config: RunConfig,
    state: AdamState,
    shuffle_rng: np.random.Generator,
    dropout_rng: np.random.Generator,
    epoch: int,
) -> Tuple[float, float]:
    """One pass over the shuffled training split; returns (mean batch loss, train accuracy %)."""
    pixels, labels = split.train.pixels, split.train.labels
    n = labels.shape[0]
    order = shuffle_rng.permutation(n)
    losses = []
    correct = 0
    for batch, start in enumerate(range(0, n, config.batch_size)):
        idx = order[start:start + config.batch_size]
        logits, cache = model_forward(model, pixels[idx], training=True, rng=dropout_rng)
        loss, grad_logits = softmax_crossentropy(logits, labels[idx])
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        losses.append(loss)
        correct += int(np.sum(np.argmax(logits, axis=-1) == labels[idx]))

        grads = model_backward(model, cache, grad_logits, config.gradient_method).params
        updated, state = adam_step(model.params, grads, state, config.lr)
        model.set_params(updated)
    return float(np.mean(losses)), 100.0 * correct / n


def train_model(
    spec: ModelSpec,
    split: DatasetSplit,
    config: RunConfig,
    checkpoint_hook: Optional[CheckpointHook] = None,
) -> Tuple[Model, RunRecord]:
    """Train a freshly initialized model and record its metrics.

    Each epoch shuffles the training split with the seeded shuffle stream, runs
    mini-batches of ``config.batch_size`` (the final partial batch is kept),
    takes one Adam step per batch on the mean cross-entropy, and evaluates the
    validation accuracy with dropout off. Test accuracy is recorded at
    ``config.snapshot_epochs`` and after the last epoch, together with the
    confusion counts.

    Args:
        spec: Architecture to train
        split: Train/val/test data
        config: Run parameters (epochs, batch size, lr, seed, ...)
        checkpoint_hook: Called at every epoch listed in config.checkpoint_epochs

    Returns:
        (trained model, run record)

    Raises:
        UsageError: If config.epochs < 1
        NumericalError: If a loss or gradient becomes non-finite
    """
    if config.epochs < 1:
        raise UsageError(f"training needs at least one epoch, got {config.epochs}")

    model = init_model(spec, config.seed)
    shuffle_rng = make_rng(config.seed, STREAM_SHUFFLE)
    dropout_rng = make_rng(config.seed, STREAM_DROPOUT)
    state = AdamState()
    threshold = config.effective_threshold
    record = RunRecord(config=config.to_dict(), convergence_threshold=threshold)
    checkpoints = set(config.checkpoint_epochs)
    snapshots = set(config.snapshot_epochs)

    if checkpoint_hook is not None and 0 in checkpoints:
        checkpoint_hook(model, 0)

    logger.info(
        "training %s on %s: %d epochs, batch %d, lr %g, seed %d",
        spec.head_kind.value, config.dataset.value, config.epochs, config.batch_size, config.lr, config.seed,
    )
    bar = tqdm(range(1, config.epochs + 1), desc=config.run_name, disable=not config.progress, leave=False)
    for epoch in bar:
        start = time.perf_counter()
        train_loss, train_acc = _run_epoch(model, split, config, state, shuffle_rng, dropout_rng, epoch)
        val_acc = evaluate_accuracy(model, split.val)
        record.add_epoch(EpochMetrics(epoch, train_loss, train_acc, val_acc), time.perf_counter() - start)
        bar.set_postfix(loss=f"{train_loss:.4f}", val=f"{val_acc:.2f}")
        logger.info(
            "%s epoch %d: loss %.6f train %.2f%% val %.2f%%", config.run_name, epoch, train_loss, train_acc, val_acc
        )

        if epoch in snapshots:
            record.snapshot_test_accuracy[epoch] = evaluate_accuracy(model, split.test)
        if checkpoint_hook is not None and epoch in checkpoints:
            checkpoint_hook(model, epoch)

    matrix = confusion(model, split.test)
    record.confusion = matrix
    record.test_accuracy = matrix.accuracy
    record.convergence_epoch = convergence_epoch(record, threshold)
    logger.info(
        "%s finished: test %.2f%%, convergence epoch %s (threshold %g%%)",
        config.run_name, record.test_accuracy, record.convergence_epoch, threshold,
    )
    return model, record


def train(spec: ModelSpec, split: DatasetSplit, config: RunConfig) -> RunRecord:
    """Train and return only the run record."""
    return train_model(spec, split, config)[1]
