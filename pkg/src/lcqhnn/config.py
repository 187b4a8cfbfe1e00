"""Run configuration: defaults, validation, JSON file loading and flag overrides.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from lcqhnn.dataclass import DatasetName, GradientMethod, HeadKind, parse_enum
from lcqhnn.errors import DataError, UsageError


@dataclass
class RunConfig:
    """Complete description of one experiment run.

    The defaults reproduce the reference protocol: Adam for 50 epochs, batch size
    64, learning rate 0.001, seed 42, 2048/512/1024 balanced splits.

    Attributes:
        dataset: Dataset to train on
        model: Head placed after the shared feature extractor
        epochs: Number of training epochs (>= 1)
        batch_size: Mini-batch size; the final partial batch is kept
        lr: Adam learning rate
        seed: Seed for initialization, split construction, shuffling and dropout
        dropout_rate: Dropout probability after the transition layer, in [0, 1)
        data_dir: Directory holding the raw dataset files
        out_dir: Directory receiving all artifacts
        train_size: Training split size (even)
        val_size: Validation split size (even)
        test_size: Test split size (even)
        convergence_threshold: Validation accuracy (percent) defining convergence;
            None selects the dataset default
        snapshot_epochs: Epochs at which test accuracy is recorded
        checkpoint_epochs: Epochs at which stage checkpoints are written (0 = untrained)
        gradient_method: Differentiation rule for the circuit
        gradcam_window: Edge length of the gradient-averaging window
        workers: Concurrency bound for comparison runs
        progress: Show progress bars
        plots: Write PNG figures next to the CSV and JSON artifacts
    """
    dataset: DatasetName = DatasetName.MNIST
    model: HeadKind = HeadKind.LCQHNN
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.001
    seed: int = 42
    dropout_rate: float = 0.5
    data_dir: str = "data"
    out_dir: str = "output"
    train_size: int = 2048
    val_size: int = 512
    test_size: int = 1024
    convergence_threshold: Optional[float] = None
    snapshot_epochs: Tuple[int, ...] = (10, 25, 50)
    checkpoint_epochs: Tuple[int, ...] = (0, 25, 50)
    gradient_method: GradientMethod = GradientMethod.ADJOINT
    gradcam_window: int = 3
    workers: int = 4
    progress: bool = True
    plots: bool = True

    def __post_init__(self) -> None:
        """Normalize enum fields and validate ranges.

        Raises:
            UsageError: If any field is out of range
        """
        self.dataset = parse_enum(DatasetName, self.dataset)
        self.model = parse_enum(HeadKind, self.model)
        self.gradient_method = parse_enum(GradientMethod, self.gradient_method)
        self.snapshot_epochs = tuple(int(e) for e in self.snapshot_epochs)
        self.checkpoint_epochs = tuple(int(e) for e in self.checkpoint_epochs)

        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise UsageError(f"lr must be a positive finite number, got {self.lr}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        for name in ("train_size", "val_size", "test_size"):
            size = getattr(self, name)
            if size < 2 or size % 2:
                raise UsageError(f"{name} must be a positive even number, got {size}")
        if self.convergence_threshold is not None and not 0.0 < self.convergence_threshold <= 100.0:
            raise UsageError(f"convergence_threshold must lie in (0, 100], got {self.convergence_threshold}")
        if any(e < 1 for e in self.snapshot_epochs):
            raise UsageError("snapshot_epochs must be >= 1")
        if any(e < 0 for e in self.checkpoint_epochs):
            raise UsageError("checkpoint_epochs must be >= 0")
        if self.gradcam_window < 1 or self.gradcam_window % 2 == 0:
            raise UsageError(f"gradcam_window must be a positive odd number, got {self.gradcam_window}")
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")

    @property
    def effective_threshold(self) -> float:
        """Convergence threshold, falling back to the dataset default."""
        if self.convergence_threshold is not None:
            return self.convergence_threshold
        return self.dataset.default_convergence_threshold

    @property
    def run_name(self) -> str:
        """File-name stem shared by all artifacts of this run."""
        return f"{self.dataset.value}_{self.model.value}_seed{self.seed}"

    def to_dict(self, *, enum_as_value: bool = True, omit_none: bool = True) -> Dict[str, Any]:
        """Serialize to a JSON-ready dictionary.

        Args:
            enum_as_value: If True, enums become their values ("mnist"); otherwise their names
            omit_none: If True, drop fields that are None

        Returns:
            Dictionary representation of the configuration
        """
        def transform(value: Any) -> Any:
            if isinstance(value, enum.Enum):
                return value.value if enum_as_value else value.name
            if isinstance(value, tuple):
                return [transform(v) for v in value]
            return value

        out: Dict[str, Any] = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if omit_none and value is None:
                continue
            out[f.name] = transform(value)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Build a config from a dictionary, rejecting unknown keys.

        Raises:
            UsageError: On unknown keys or invalid values
        """
        known = {f.name for f in dc_fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise UsageError(f"invalid config: {e}") from e

    def replace(self, **changes: Any) -> "RunConfig":
        """Return a copy with some fields changed (validated again)."""
        data = self.to_dict(omit_none=False)
        data.update(changes)
        return RunConfig.from_dict(data)


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a JSON config file into a plain dictionary.

    Raises:
        DataError: If the file is missing
        UsageError: If the file is not a JSON object
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {p} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    return data


def merge_overrides(base: Dict[str, Any], overrides: Dict[str, Any]) -> RunConfig:
    """Apply flag values over file values; None in overrides means "flag not given"."""
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(merged)
