"""Differentiable classical layers with explicit forward and backward passes.

Tensors are numpy float64 arrays in row-major (C) order. Every layer accepts a
single sample or a batch with a leading sample axis:

    conv2d / maxpool2   (C, H, W)  or (N, C, H, W)
    dense               (in,)      or (N, in)
    softmax_crossentropy (classes,) or (N, classes)

Parameter gradients of batched calls are summed over the batch.

The convolution is a valid (unpadded) cross-correlation with a 3x3 kernel:
out[o, i, j] = bias[o] + sum_{c, a, b} in[c, i + a, j + b] * kernel[o, c, a, b].
Since the kernel is learned, this is a reparametrization of the flipped-index
convolution sum.
"""

from dataclasses import dataclass
import math
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lcqhnn.errors import ShapeError, UsageError

KERNEL_SIZE = 3


@dataclass
class ConvLayer:
    """3x3 convolution weights.

    Attributes:
        kernel: Weights of shape (out_channels, in_channels, 3, 3)
        bias: Per-output-channel bias, shape (out_channels,)
    """
    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.kernel.ndim != 4 or self.kernel.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ShapeError(f"kernel must have shape (out, in, 3, 3), got {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(f"bias must have shape ({self.kernel.shape[0]},), got {self.bias.shape}")

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]


@dataclass
class DenseLayer:
    """Fully connected weights: output = weight @ input + bias.

    Attributes:
        weight: Shape (out, in)
        bias: Shape (out,)
    """
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"inconsistent dense shapes: weight {self.weight.shape}, bias {self.bias.shape}")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform weights in [-sqrt(1/fan_in), +sqrt(1/fan_in)]."""
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _batched(x: np.ndarray, sample_ndim: int) -> Tuple[np.ndarray, bool]:
    """Add a leading batch axis to a single sample."""
    if x.ndim == sample_ndim:
        return x[None], True
    if x.ndim == sample_ndim + 1:
        return x, False
    raise ShapeError(f"expected {sample_ndim} or {sample_ndim + 1} dimensions, got shape {x.shape}")


# ---------- convolution ----------

def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Valid 3x3 cross-correlation plus bias: (C_in, H, W) -> (C_out, H-2, W-2).

    Raises:
        ShapeError: If the channels do not match or H, W < 3
    """
    xb, single = _batched(np.asarray(x, dtype=np.float64), 3)
    if xb.shape[1] != layer.in_channels:
        raise ShapeError(f"conv expects {layer.in_channels} input channels, got {xb.shape[1]}")
    if xb.shape[2] < KERNEL_SIZE or xb.shape[3] < KERNEL_SIZE:
        raise ShapeError(f"spatial size {xb.shape[2:]} is smaller than the {KERNEL_SIZE}x{KERNEL_SIZE} kernel")
    windows = sliding_window_view(xb, (KERNEL_SIZE, KERNEL_SIZE), axis=(2, 3))  # (N, C, H', W', 3, 3)
    out = np.einsum("nchwab,ocab->nohw", windows, layer.kernel, optimize=True)
    out += layer.bias[None, :, None, None]
    return out[0] if single else out


def conv2d_backward(
    x: np.ndarray, layer: ConvLayer, grad_out: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward.

    Returns:
        (grad_input, grad_kernel, grad_bias)

    Raises:
        ShapeError: If grad_out does not match the forward output shape
    """
    xb, single = _batched(np.asarray(x, dtype=np.float64), 3)
    gb, _ = _batched(np.asarray(grad_out, dtype=np.float64), 3)
    expected = (xb.shape[0], layer.out_channels, xb.shape[2] - KERNEL_SIZE + 1, xb.shape[3] - KERNEL_SIZE + 1)
    if gb.shape != expected:
        raise ShapeError(f"grad_out must have shape {expected}, got {gb.shape}")

    windows = sliding_window_view(xb, (KERNEL_SIZE, KERNEL_SIZE), axis=(2, 3))
    grad_kernel = np.einsum("nchwab,nohw->ocab", windows, gb, optimize=True)
    grad_bias = gb.sum(axis=(0, 2, 3))

    # Full correlation of the zero-padded output gradient with the flipped kernel
    pad = KERNEL_SIZE - 1
    padded = np.pad(gb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    g_windows = sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(2, 3))
    flipped = layer.kernel[:, :, ::-1, ::-1]
    grad_input = np.einsum("nohwab,ocab->nchw", g_windows, flipped, optimize=True)

    return (grad_input[0] if single else grad_input), grad_kernel, grad_bias


# ---------- activation ----------

def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass the gradient where x > 0; zero elsewhere, including x == 0."""
    if np.shape(x) != np.shape(grad_out):
        raise ShapeError(f"relu grad shape {np.shape(grad_out)} does not match input {np.shape(x)}")
    return np.where(x > 0.0, grad_out, 0.0)


# ---------- pooling ----------

def maxpool2(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Non-overlapping 2x2 max pooling with stride 2.

    A trailing odd row/column is dropped. Within each window the cells are
    numbered 0..3 in row-major order; ties resolve to the lowest number.

    Returns:
        (pooled, argmax) where argmax holds the winning window cell per output

    Raises:
        ShapeError: If H or W is below 2
    """
    xb, single = _batched(np.asarray(x, dtype=np.float64), 3)
    n, c, h, w = xb.shape
    if h < 2 or w < 2:
        raise ShapeError(f"max pooling needs spatial size >= 2, got {(h, w)}")
    ho, wo = h // 2, w // 2
    cells = (
        xb[:, :, : 2 * ho, : 2 * wo]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    argmax = np.argmax(cells, axis=-1)
    pooled = np.take_along_axis(cells, argmax[..., None], axis=-1)[..., 0]
    if single:
        return pooled[0], argmax[0]
    return pooled, argmax


def maxpool2_backward(x: np.ndarray, argmax: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Route each output gradient to the input cell that won its window."""
    xb, single = _batched(np.asarray(x, dtype=np.float64), 3)
    ab, _ = _batched(np.asarray(argmax), 3)
    gb, _ = _batched(np.asarray(grad_out, dtype=np.float64), 3)
    n, c, h, w = xb.shape
    ho, wo = h // 2, w // 2
    if gb.shape != (n, c, ho, wo) or ab.shape != gb.shape:
        raise ShapeError(f"pool gradient shape {gb.shape} does not match pooled shape {(n, c, ho, wo)}")
    cells = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(cells, ab[..., None], gb[..., None], axis=-1)
    grad = np.zeros_like(xb)
    grad[:, :, : 2 * ho, : 2 * wo] = (
        cells.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
    )
    return grad[0] if single else grad


# ---------- dense ----------

def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """weight @ x + bias.

    Raises:
        ShapeError: If x does not have the layer's input dimension
    """
    xb, single = _batched(np.asarray(x, dtype=np.float64), 1)
    if xb.shape[1] != layer.in_features:
        raise ShapeError(f"dense layer expects {layer.in_features} inputs, got {xb.shape[1]}")
    out = xb @ layer.weight.T + layer.bias
    return out[0] if single else out


def dense_backward(
    x: np.ndarray, layer: DenseLayer, grad_out: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of dense_forward.

    Returns:
        (grad_input = weight^T grad_out, grad_weight = grad_out (x) x, grad_bias = grad_out)
    """
    xb, single = _batched(np.asarray(x, dtype=np.float64), 1)
    gb, _ = _batched(np.asarray(grad_out, dtype=np.float64), 1)
    if gb.shape != (xb.shape[0], layer.out_features) or xb.shape[1] != layer.in_features:
        raise ShapeError(f"dense gradient shape {gb.shape} does not match layer {layer.weight.shape}")
    grad_input = gb @ layer.weight
    grad_weight = gb.T @ xb
    grad_bias = gb.sum(axis=0)
    return (grad_input[0] if single else grad_input), grad_weight, grad_bias


# ---------- dropout ----------

def dropout(
    x: np.ndarray, rate: float, training: bool, rng: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Inverted dropout.

    In training mode each element is zeroed with probability ``rate`` and the
    survivors are scaled by 1/(1 - rate). In eval mode (or with rate 0) the
    input is returned unchanged and the mask is None.

    Returns:
        (output, mask); backward multiplies by the mask

    Raises:
        UsageError: If rate is outside [0, 1) or training needs an rng that is missing
    """
    if not 0.0 <= rate < 1.0:
        raise UsageError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise UsageError("training-mode dropout needs a random generator")
    mask = (rng.random(np.shape(x)) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_out: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


# ---------- loss ----------

def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_crossentropy(logits: np.ndarray, label) -> Tuple[float, np.ndarray]:
    """Cross-entropy of softmax(logits) against integer labels.

    For a single logit vector returns (-log p_label, p - one_hot). For a batch
    (N, classes) with N labels returns the mean loss and the gradient of the
    mean, (p - one_hot) / N.

    Raises:
        ShapeError: If a label is out of range
    """
    lb, single = _batched(np.asarray(logits, dtype=np.float64), 1)
    labels = np.atleast_1d(np.asarray(label)).astype(np.int64)
    n, classes = lb.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= classes):
        raise ShapeError(f"labels must lie in [0, {classes}), got {labels.tolist()}")

    shifted = lb - np.max(lb, axis=-1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=-1))
    rows = np.arange(n)
    losses = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0

    if single:
        return float(losses[0]), grad[0]
    return float(np.mean(losses)), grad / n
