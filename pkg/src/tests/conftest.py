"""Shared fixtures: gate oracles, finite differences, dataset file writers, synthetic splits."""

from functools import reduce
import gzip
import json
import math
from pathlib import Path
import struct
from typing import Callable, Sequence

import numpy as np
import pytest

from lcqhnn.config import RunConfig
from lcqhnn.datasets import RawSamples, make_binary_split

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)


class GateOracle:
    """Full-register matrices from Kronecker products, qubit 0 leftmost."""

    @staticmethod
    def single(n: int, qubit: int, gate: np.ndarray) -> np.ndarray:
        ops = [I2] * n
        ops[qubit] = gate
        return reduce(np.kron, ops)

    @staticmethod
    def cnot(n: int, control: int, target: int) -> np.ndarray:
        off = [I2] * n
        off[control] = P0
        on = [I2] * n
        on[control] = P1
        on[target] = X
        return reduce(np.kron, off) + reduce(np.kron, on)

    @staticmethod
    def u1(delta: float) -> np.ndarray:
        return np.array([[1, 0], [0, np.exp(1j * delta)]], dtype=np.complex128)

    @staticmethod
    def ry(theta: float) -> np.ndarray:
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)

    @classmethod
    def circuit_state(cls, x: Sequence[float], theta: Sequence[float]) -> np.ndarray:
        n = 4
        psi = np.zeros(16, dtype=np.complex128)
        psi[0] = 1.0
        for q in range(n):
            psi = cls.single(n, q, H) @ psi
        for q in range(n):
            psi = cls.single(n, q, cls.u1(2 * x[q])) @ psi
        for c, t in ((0, 1), (1, 2), (2, 3)):
            psi = cls.cnot(n, c, t) @ psi
        for q in range(n):
            psi = cls.single(n, q, cls.ry(theta[q])) @ psi
        for c, t in ((2, 3), (1, 2), (0, 1)):
            psi = cls.cnot(n, c, t) @ psi
        return cls.single(n, 0, H) @ psi

    @staticmethod
    def expectations(psi: np.ndarray) -> np.ndarray:
        probs = np.abs(psi) ** 2
        idx = np.arange(16)
        return np.array([np.sum(probs * (1 - 2 * ((idx >> (3 - q)) & 1))) for q in range(4)])

    @staticmethod
    def reduced_density(psi: np.ndarray, n: int, qubit: int) -> np.ndarray:
        """Brute-force partial trace over every wire except ``qubit``."""
        rho = np.zeros((2, 2), dtype=np.complex128)
        for i in range(1 << n):
            for j in range(1 << n):
                bi = [(i >> (n - 1 - k)) & 1 for k in range(n)]
                bj = [(j >> (n - 1 - k)) & 1 for k in range(n)]
                if all(bi[k] == bj[k] for k in range(n) if k != qubit):
                    rho[bi[qubit], bj[qubit]] += psi[i] * np.conj(psi[j])
        return rho


@pytest.fixture
def oracle() -> GateOracle:
    return GateOracle()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Gradient of a scalar function by central differences, same shape as x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        up = f(x)
        x[idx] = old - eps
        down = f(x)
        x[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad


@pytest.fixture
def finite_difference():
    return central_difference


@pytest.fixture
def random_state(rng):
    def make(n: int) -> np.ndarray:
        amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return amps / np.linalg.norm(amps)

    return make


# ---------- dataset files ----------

def write_idx_images(path: Path, images: np.ndarray) -> Path:
    n, rows, cols = images.shape
    data = struct.pack(">IIII", 0x00000803, n, rows, cols) + images.astype(np.uint8).tobytes()
    return _write(path, data)


def write_idx_labels(path: Path, labels: np.ndarray) -> Path:
    data = struct.pack(">II", 0x00000801, len(labels)) + np.asarray(labels, dtype=np.uint8).tobytes()
    return _write(path, data)


def write_cifar_batch(path: Path, images: np.ndarray, labels: np.ndarray) -> Path:
    records = np.concatenate(
        [np.asarray(labels, dtype=np.uint8)[:, None], images.astype(np.uint8).reshape(len(labels), -1)], axis=1
    )
    return _write(path, records.tobytes())


def _write(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as f:
            f.write(data)
    else:
        path.write_bytes(data)
    return path


@pytest.fixture
def idx_writer():
    return write_idx_images, write_idx_labels


@pytest.fixture
def cifar_writer():
    return write_cifar_batch


def synthetic_images(labels: np.ndarray, shape, seed: int) -> np.ndarray:
    """uint8 images: class 0 bright in the left half, any other class bright in the right half."""
    gen = np.random.default_rng(seed)
    images = gen.integers(0, 40, size=(len(labels),) + tuple(shape)).astype(np.uint8)
    half = shape[-1] // 2
    for i, label in enumerate(labels):
        cols = slice(0, half) if label == 0 else slice(half, shape[-1])
        images[i, ..., 4:-4, cols] = 200
    return images


@pytest.fixture
def synthetic_pool():
    def make(per_class: int = 40, classes=(0, 1, 2), shape=(1, 28, 28), seed: int = 0) -> RawSamples:
        labels = np.repeat(np.array(classes, dtype=np.uint8), per_class)
        return RawSamples(synthetic_images(labels, shape, seed), labels)

    return make


@pytest.fixture
def tiny_split(synthetic_pool):
    return make_binary_split(synthetic_pool(), 0, 1, seed=0, sizes=(32, 16, 16))


@pytest.fixture
def mnist_dir(tmp_path) -> Path:
    """A data directory with small synthetic MNIST-layout IDX files (classes 0, 1, 2)."""
    root = tmp_path / "data"
    for prefix, per_class, seed in (("train", 30, 1), ("t10k", 15, 2)):
        labels = np.repeat(np.array([0, 1, 2], dtype=np.uint8), per_class)
        images = synthetic_images(labels, (28, 28), seed)
        write_idx_images(root / "mnist" / f"{prefix}-images-idx3-ubyte", images)
        write_idx_labels(root / "mnist" / f"{prefix}-labels-idx1-ubyte", labels)
    return root


@pytest.fixture
def tiny_config_file(tmp_path, mnist_dir) -> Path:
    """JSON config for a fast MNIST-layout run on the synthetic files."""
    config = RunConfig(
        dataset="mnist",
        epochs=2,
        batch_size=8,
        lr=0.01,
        train_size=24,
        val_size=8,
        test_size=8,
        snapshot_epochs=(1, 2),
        checkpoint_epochs=(0, 2),
        data_dir=str(mnist_dir),
        progress=False,
    )
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(config.to_dict()), encoding="utf-8")
    return path
