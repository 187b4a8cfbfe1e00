"""Dataset ingestion: IDX (MNIST, FashionMNIST) and CIFAR-10 binary files,
pixel normalization, and seeded class-balanced binary splits.

File formats:

    IDX images   >u4 magic 0x00000803, >u4 count, >u4 rows, >u4 cols, then count*rows*cols u8 pixels
    IDX labels   >u4 magic 0x00000801, >u4 count, then count u8 labels
    CIFAR-10     records of 3073 bytes: u8 label, then 1024 R, 1024 G, 1024 B pixels (row-major 32x32)

Paths ending in ``.gz`` are decompressed transparently.
"""

from dataclasses import dataclass
import gzip
import logging
from pathlib import Path
import struct
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from lcqhnn.dataclass import DatasetName, ImageFamily
from lcqhnn.errors import (
    BadMagicError,
    CountMismatchError,
    DataError,
    DataFormatError,
    InsufficientSamplesError,
    ShapeError,
    TruncatedFileError,
    UsageError,
)
from lcqhnn.utils import STREAM_SPLIT, make_rng

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR_NUM_CLASSES = 10

DEFAULT_SPLIT_SIZES = (2048, 512, 1024)

PathLike = Union[str, Path]


@dataclass
class RawSamples:
    """Undecoded dataset pool.

    Attributes:
        images: uint8 pixels, shape (N, C, H, W)
        labels: Original dataset labels, shape (N,)
    """
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.images.shape[0] != self.labels.shape[0]:
            raise CountMismatchError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass
class ImageSample:
    """One normalized image with its binary and original label."""
    pixels: np.ndarray
    label: int
    source_label: int


@dataclass
class LabeledImages:
    """A split: normalized pixels plus binary labels.

    Attributes:
        pixels: float64 in [0, 1], shape (N, C, H, W)
        labels: Binary labels {0, 1}, shape (N,)
        source_labels: Original dataset labels
        source_indices: Index of each sample in the pool it was drawn from
    """
    pixels: np.ndarray
    labels: np.ndarray
    source_labels: np.ndarray
    source_indices: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> ImageSample:
        return ImageSample(self.pixels[i], int(self.labels[i]), int(self.source_labels[i]))

    def class_counts(self) -> Tuple[int, int]:
        ones = int(np.sum(self.labels == 1))
        return len(self) - ones, ones


@dataclass
class DatasetSplit:
    """Balanced, disjoint train/val/test splits of one binary task."""
    train: LabeledImages
    val: LabeledImages
    test: LabeledImages
    seed: int
    class_a: int
    class_b: int


def normalize_pixels(raw: np.ndarray) -> np.ndarray:
    """Map uint8 pixels to [0, 1]: value / 255.0 (0 -> 0.0, 255 -> 1.0 exactly)."""
    return np.asarray(raw, dtype=np.float64) / 255.0


def _read_bytes(path: PathLike) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file not found: {p}")
    if p.suffix == ".gz":
        with gzip.open(p, "rb") as f:
            return f.read()
    return p.read_bytes()


def _parse_idx(data: bytes, expected_magic: int, ndim: int, what: str) -> np.ndarray:
    if len(data) < 4:
        raise TruncatedFileError(f"{what}: file too short for an IDX magic number ({len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{what}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    header_len = 4 * (1 + ndim)
    if len(data) < header_len:
        raise TruncatedFileError(f"{what}: file too short for an IDX header ({len(data)} bytes)")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    expected = int(np.prod(dims))
    payload = len(data) - header_len
    if payload != expected:
        raise TruncatedFileError(f"{what}: header announces {expected} bytes of data, file holds {payload}")
    return np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims)


def load_idx(images_path: PathLike, labels_path: PathLike) -> RawSamples:
    """Parse an IDX image file and its label file.

    Returns:
        RawSamples with images of shape (N, 1, rows, cols)

    Raises:
        DataError: Missing file
        BadMagicError: Wrong magic number
        TruncatedFileError: Payload length disagrees with the header
        CountMismatchError: Image and label counts differ
    """
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, 3, str(images_path))
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, 1, str(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images_path} holds {images.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        )
    logger.info("loaded %d IDX samples from %s", images.shape[0], images_path)
    return RawSamples(images[:, None, :, :].copy(), labels.copy())


def load_cifar10(batch_paths: Sequence[PathLike]) -> RawSamples:
    """Parse one or more CIFAR-10 binary batch files.

    Returns:
        RawSamples with images of shape (N, 3, 32, 32), labels 0..9

    Raises:
        DataError: Missing file
        TruncatedFileError: File size not a multiple of 3073
        DataFormatError: Label outside 0..9
    """
    images: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for path in batch_paths:
        data = _read_bytes(path)
        if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES:
            raise TruncatedFileError(f"{path}: size {len(data)} is not a multiple of {CIFAR_RECORD_BYTES}")
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        if np.any(records[:, 0] >= CIFAR_NUM_CLASSES):
            raise DataFormatError(f"{path}: label outside 0..{CIFAR_NUM_CLASSES - 1}")
        labels.append(records[:, 0].copy())
        images.append(records[:, 1:].reshape(-1, 3, 32, 32).copy())
    if not images:
        raise DataError("no CIFAR-10 batch files given")
    raw = RawSamples(np.concatenate(images), np.concatenate(labels))
    logger.info("loaded %d CIFAR-10 samples from %d files", len(raw), len(images))
    return raw


def check_family(raw: RawSamples, family: ImageFamily) -> None:
    """Assert the per-sample layout; resizing is a no-op for the supported datasets."""
    if raw.images.shape[1:] != family.shape:
        raise ShapeError(f"expected samples of shape {family.shape}, got {raw.images.shape[1:]}")


def _take(raw: RawSamples, indices: np.ndarray, class_b: int) -> LabeledImages:
    source_labels = raw.labels[indices].astype(np.int64)
    return LabeledImages(
        pixels=normalize_pixels(raw.images[indices]),
        labels=(source_labels == class_b).astype(np.int64),
        source_labels=source_labels,
        source_indices=indices.astype(np.int64),
    )


def make_binary_split(
    samples: RawSamples,
    class_a_label: int,
    class_b_label: int,
    seed: int,
    test_samples: Optional[RawSamples] = None,
    sizes: Tuple[int, int, int] = DEFAULT_SPLIT_SIZES,
) -> DatasetSplit:
    """Build class-balanced, disjoint train/val/test splits for a two-class task.

    Samples of class_a become label 0, class_b label 1. Each class is
    permuted with the seeded generator; the first train/2 go to train, the
    next val/2 to validation. Test draws come from ``test_samples`` when given
    (the official test partition), otherwise from the remaining pool samples.
    Each split is shuffled again so the classes interleave.

    Args:
        samples: Pool for train and validation (official train partition)
        class_a_label: Original label relabelled to 0
        class_b_label: Original label relabelled to 1
        seed: Split seed; equal seeds give identical splits
        test_samples: Optional separate pool for the test split
        sizes: (train, val, test) sizes, each even

    Returns:
        DatasetSplit

    Raises:
        InsufficientSamplesError: If a class is too small
        UsageError: If the classes coincide or a size is odd
    """
    if class_a_label == class_b_label:
        raise UsageError("the two classes must differ")
    n_train, n_val, n_test = sizes
    if any(s < 2 or s % 2 for s in sizes):
        raise UsageError(f"split sizes must be positive and even, got {sizes}")
    half_train, half_val, half_test = n_train // 2, n_val // 2, n_test // 2
    rng = make_rng(seed, STREAM_SPLIT)

    train_parts, val_parts, test_parts = [], [], []
    for cls in (class_a_label, class_b_label):
        pool = rng.permutation(np.flatnonzero(samples.labels == cls))
        needed = half_train + half_val + (0 if test_samples is not None else half_test)
        if pool.shape[0] < needed:
            raise InsufficientSamplesError(f"class {cls}: need {needed} samples, pool holds {pool.shape[0]}")
        train_parts.append(pool[:half_train])
        val_parts.append(pool[half_train:half_train + half_val])
        if test_samples is None:
            test_parts.append(pool[half_train + half_val:needed])
        else:
            test_pool = rng.permutation(np.flatnonzero(test_samples.labels == cls))
            if test_pool.shape[0] < half_test:
                raise InsufficientSamplesError(
                    f"class {cls}: need {half_test} test samples, test pool holds {test_pool.shape[0]}"
                )
            test_parts.append(test_pool[:half_test])

    train_idx = rng.permutation(np.concatenate(train_parts))
    val_idx = rng.permutation(np.concatenate(val_parts))
    test_idx = rng.permutation(np.concatenate(test_parts))
    test_source = test_samples if test_samples is not None else samples

    split = DatasetSplit(
        train=_take(samples, train_idx, class_b_label),
        val=_take(samples, val_idx, class_b_label),
        test=_take(test_source, test_idx, class_b_label),
        seed=seed,
        class_a=class_a_label,
        class_b=class_b_label,
    )
    logger.info(
        "built split %d/%d/%d for classes %d vs %d (seed %d)",
        len(split.train), len(split.val), len(split.test), class_a_label, class_b_label, seed,
    )
    return split


# ---------- on-disk inventory ----------

_SUBDIRS = {
    DatasetName.MNIST: ("mnist", "MNIST/raw", "MNIST"),
    DatasetName.FASHION: ("fashion", "fashion-mnist", "FashionMNIST/raw", "FashionMNIST"),
    DatasetName.CIFAR10: ("cifar10", "cifar-10-batches-bin"),
}


def _candidate_dirs(dataset: DatasetName, data_dir: Path) -> Iterable[Path]:
    for sub in _SUBDIRS[dataset]:
        yield data_dir / sub
    yield data_dir


def _find_file(directory: Path, stems: Iterable[str]) -> Optional[Path]:
    for stem in stems:
        for name in (stem, stem + ".gz"):
            p = directory / name
            if p.is_file():
                return p
    return None


def _idx_names(prefix: str, kind: str) -> Tuple[str, ...]:
    idx = "idx3" if kind == "images" else "idx1"
    return (f"{prefix}-{kind}-{idx}-ubyte", f"{prefix}-{kind}.{idx}-ubyte")


def load_dataset(dataset: DatasetName, data_dir: PathLike) -> Tuple[RawSamples, RawSamples]:
    """Locate and load the official train and test partitions of a dataset.

    IDX datasets are looked up in ``data_dir/<name>`` and then ``data_dir``
    (``mnist``/``MNIST/raw`` or ``fashion``/``FashionMNIST/raw``); CIFAR-10 in
    ``data_dir/cifar10``, ``data_dir/cifar-10-batches-bin``, then ``data_dir``.

    Returns:
        (train pool, test pool)

    Raises:
        DataError: If the directory or a required file is missing
    """
    root = Path(data_dir)
    if not root.is_dir():
        raise DataError(f"data directory not found: {root}")

    for directory in _candidate_dirs(dataset, root):
        if not directory.is_dir():
            continue
        if dataset is DatasetName.CIFAR10:
            batches = [_find_file(directory, [f"data_batch_{i}.bin"]) for i in range(1, 6)]
            test = _find_file(directory, ["test_batch.bin"])
            if all(batches) and test:
                train_raw, test_raw = load_cifar10(batches), load_cifar10([test])
                break
        else:
            files = [
                _find_file(directory, _idx_names(prefix, kind))
                for prefix in ("train", "t10k")
                for kind in ("images", "labels")
            ]
            if all(files):
                train_raw, test_raw = load_idx(files[0], files[1]), load_idx(files[2], files[3])
                break
    else:
        raise DataError(f"no {dataset.value} files found under {root}")

    check_family(train_raw, dataset.family)
    check_family(test_raw, dataset.family)
    return train_raw, test_raw


def load_binary_split(
    dataset: DatasetName,
    data_dir: PathLike,
    seed: int,
    sizes: Tuple[int, int, int] = DEFAULT_SPLIT_SIZES,
) -> DatasetSplit:
    """Load a dataset and build the split for its binary task."""
    train_raw, test_raw = load_dataset(dataset, data_dir)
    class_a, class_b = dataset.class_pair
    return make_binary_split(train_raw, class_a, class_b, seed, test_samples=test_raw, sizes=sizes)
