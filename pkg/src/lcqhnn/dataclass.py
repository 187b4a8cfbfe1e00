"""Enums and run-level records shared across training, evaluation, and the CLI.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Type, TypeVar
import enum

from lcqhnn.errors import UsageError

E = TypeVar("E", bound=enum.Enum)


class ImageFamily(enum.Enum):
    """Tensor layout family of a dataset.

    The value is the (channels, height, width) layout every sample must have.
    """
    GRAYSCALE_28 = (1, 28, 28)  # MNIST, FashionMNIST
    RGB_32 = (3, 32, 32)        # CIFAR-10

    @property
    def shape(self) -> tuple:
        return self.value


class DatasetName(enum.Enum):
    """Datasets the experiments run on."""
    MNIST = "mnist"
    FASHION = "fashion"
    CIFAR10 = "cifar10"

    @property
    def family(self) -> ImageFamily:
        if self is DatasetName.CIFAR10:
            return ImageFamily.RGB_32
        return ImageFamily.GRAYSCALE_28

    @property
    def class_pair(self) -> tuple:
        """Source labels (class_a, class_b) relabelled to (0, 1).

        MNIST "0"/"1"; FashionMNIST "pants" (1, Trouser) / "shirt" (6, Shirt);
        CIFAR-10 "airplane" (0) / "car" (1, automobile).
        """
        return {
            DatasetName.MNIST: (0, 1),
            DatasetName.FASHION: (1, 6),
            DatasetName.CIFAR10: (0, 1),
        }[self]

    @property
    def default_convergence_threshold(self) -> float:
        return 99.0 if self is DatasetName.MNIST else 90.0


class HeadKind(enum.Enum):
    """Classification head placed after the shared feature extractor."""
    LCQHNN = "lcqhnn"  # VQC -> FC(4->2)
    CNN4 = "cnn4"      # FC(4->1) -> FC(1->2)
    CNN8 = "cnn8"      # FC(4->2) -> FC(2->2)
    CNN16 = "cnn16"    # FC(4->4) -> FC(4->2)


class GradientMethod(enum.Enum):
    """How the variational circuit is differentiated during training."""
    ADJOINT = "adjoint"
    PARAMETER_SHIFT = "parameter_shift"


def parse_enum(enum_cls: Type[E], value: Any) -> E:
    """Parse an enum member from a member, its value, or its (case-insensitive) name.

    Args:
        enum_cls: Target enum class
        value: Enum member, value (e.g. "mnist"), or name (e.g. "MNIST")

    Returns:
        The matching enum member

    Raises:
        UsageError: If nothing matches
    """
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        pass
    if isinstance(value, str):
        try:
            return enum_cls[value.upper()]
        except KeyError:
            pass
    choices = ", ".join(str(m.value) for m in enum_cls)
    raise UsageError(f"invalid {enum_cls.__name__} {value!r}; expected one of: {choices}")


@dataclass
class ConfusionMatrix:
    """Binary confusion counts; class 1 is the positive class.

    Attributes:
        tp: Positives predicted positive
        tn: Negatives predicted negative
        fp: Negatives predicted positive
        fn: Positives predicted negative
    """
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"confusion count {name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        """Accuracy in percent, recomputed from the counts."""
        if self.total == 0:
            raise ValueError("accuracy of an empty confusion matrix is undefined")
        return 100.0 * (self.tp + self.tn) / self.total

    def to_dict(self) -> Dict[str, int]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConfusionMatrix":
        return cls(tp=int(data["tp"]), tn=int(data["tn"]), fp=int(data["fp"]), fn=int(data["fn"]))


@dataclass
class EpochMetrics:
    """One row of the per-epoch metrics table.

    Attributes:
        epoch: 1-based epoch index
        train_loss: Mean of the per-batch mean cross-entropy
        train_acc: Training accuracy in percent (dropout active)
        val_acc: Validation accuracy in percent (eval mode)
    """
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EpochMetrics":
        return cls(
            epoch=int(data["epoch"]),
            train_loss=float(data["train_loss"]),
            train_acc=float(data["train_acc"]),
            val_acc=float(data["val_acc"]),
        )


@dataclass
class RunRecord:
    """Everything one training run produced, apart from the parameters.

    Attributes:
        config: Snapshot of the RunConfig as a plain dict
        epochs: Per-epoch rows, contiguous from 1
        epoch_seconds: Wall-clock seconds per epoch (not part of the metrics CSV)
        snapshot_test_accuracy: Test accuracy (percent) at selected epochs
        test_accuracy: Final test accuracy in percent
        confusion: Final test confusion matrix
        convergence_epoch: First epoch whose validation accuracy reached the threshold
        convergence_threshold: Threshold used for convergence_epoch
    """
    config: Dict[str, Any]
    epochs: List[EpochMetrics] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    snapshot_test_accuracy: Dict[int, float] = field(default_factory=dict)
    test_accuracy: Optional[float] = None
    confusion: Optional[ConfusionMatrix] = None
    convergence_epoch: Optional[int] = None
    convergence_threshold: Optional[float] = None

    def add_epoch(self, row: EpochMetrics, seconds: float) -> None:
        """Append an epoch row, keeping epochs contiguous from 1."""
        expected = len(self.epochs) + 1
        if row.epoch != expected:
            raise ValueError(f"epoch rows must be contiguous: expected {expected}, got {row.epoch}")
        self.epochs.append(row)
        self.epoch_seconds.append(seconds)

    @property
    def val_accuracies(self) -> List[float]:
        return [row.val_acc for row in self.epochs]

    def to_dict(self) -> Dict[str, Any]:
        """Convert the record to a JSON-ready dictionary.

        Snapshot epochs become string keys, as JSON objects require.
        """
        return {
            "config": self.config,
            "epochs": [row.to_dict() for row in self.epochs],
            "epoch_seconds": self.epoch_seconds,
            "snapshot_test_accuracy": {str(k): v for k, v in sorted(self.snapshot_test_accuracy.items())},
            "test_accuracy": self.test_accuracy,
            "confusion": self.confusion.to_dict() if self.confusion else None,
            "convergence_epoch": self.convergence_epoch,
            "convergence_threshold": self.convergence_threshold,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        record = cls(
            config=dict(data.get("config", {})),
            snapshot_test_accuracy={int(k): float(v) for k, v in data.get("snapshot_test_accuracy", {}).items()},
            test_accuracy=data.get("test_accuracy"),
            confusion=ConfusionMatrix.from_dict(data["confusion"]) if data.get("confusion") else None,
            convergence_epoch=data.get("convergence_epoch"),
            convergence_threshold=data.get("convergence_threshold"),
        )
        seconds = list(data.get("epoch_seconds", []))
        for i, row in enumerate(data.get("epochs", [])):
            record.add_epoch(EpochMetrics.from_dict(row), seconds[i] if i < len(seconds) else 0.0)
        return record
