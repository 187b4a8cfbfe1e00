"""Grad-CAM with a spatially windowed channel weight.

For the last convolutional layer's output A (K channels, h x w, taken before
its ReLU) and the target-class logit y:

    alpha_k(i, j) = dy / dA_k(i, j)
    w_k(i, j)     = mean of alpha_k over the window centred on (i, j), clipped at the borders
    G(i, j)       = max(0, sum_k w_k(i, j) * A_k(i, j))

G is upsampled to the input resolution by nearest neighbour. Only grayscale
(28x28) models are supported.
"""

from dataclasses import dataclass
import logging
from typing import Tuple

import numpy as np
from matplotlib import colormaps
from numpy.lib.stride_tricks import sliding_window_view

from lcqhnn.dataclass import ImageFamily
from lcqhnn.errors import ShapeError, UsageError
from lcqhnn.layers import softmax
from lcqhnn.models import N_CLASSES, Model, model_backward, model_forward

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 3
OVERLAY_ALPHA = 0.5
OVERLAY_CMAP = "hot"


@dataclass
class Heatmap:
    """Class-attribution map.

    Attributes:
        values: Non-negative map on the conv2 output grid (11 x 11 for 28 x 28 inputs)
        upsampled: Nearest-neighbour copy at input resolution
        target_class: Class whose logit was attributed
    """
    values: np.ndarray
    upsampled: np.ndarray
    target_class: int

    @property
    def mass(self) -> float:
        return float(np.sum(self.values))


def window_mean(alpha: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Per-channel mean over a centred window; border cells average only the cells inside the map."""
    if window < 1 or window % 2 == 0:
        raise UsageError(f"window must be a positive odd number, got {window}")
    r = window // 2
    pad = ((0, 0), (r, r), (r, r))
    sums = sliding_window_view(np.pad(alpha, pad), (window, window), axis=(1, 2)).sum(axis=(-2, -1))
    ones = np.pad(np.ones(alpha.shape[1:]), pad[1:])
    counts = sliding_window_view(ones, (window, window)).sum(axis=(-2, -1))
    return sums / counts


def gradcam_from_activations(activations: np.ndarray, alpha: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """G = ReLU(sum_k window_mean(alpha)_k * A_k) for (K, h, w) activations and gradients."""
    if activations.shape != alpha.shape or activations.ndim != 3:
        raise ShapeError(f"activations {activations.shape} and gradients {alpha.shape} must be equal (K, h, w) arrays")
    weights = window_mean(alpha, window)
    return np.maximum(np.sum(weights * activations, axis=0), 0.0)


def upsample_nearest(values: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resize of a 2-D map; output cell (i, j) reads source (i*h//H, j*w//W)."""
    h, w = values.shape
    rows = (np.arange(size[0]) * h) // size[0]
    cols = (np.arange(size[1]) * w) // size[1]
    return values[np.ix_(rows, cols)]


def gradcam(model: Model, image: np.ndarray, target_class: int, window: int = DEFAULT_WINDOW) -> Heatmap:
    """Attribute the target-class logit to the last convolutional layer.

    Args:
        model: Trained or untrained grayscale-family model
        image: One image of shape (1, 28, 28)
        target_class: 0 or 1
        window: Odd edge length of the gradient-averaging window

    Returns:
        Heatmap

    Raises:
        UsageError: For RGB (CIFAR-10) models
        ShapeError: On a wrong image shape or class index
    """
    if model.spec.family is not ImageFamily.GRAYSCALE_28:
        raise UsageError("Grad-CAM supports grayscale datasets only (mnist, fashion); cifar10 is not visualized")
    if not 0 <= target_class < N_CLASSES:
        raise ShapeError(f"target class must be 0 or 1, got {target_class}")
    logits, cache = model_forward(model, image, training=False)
    upstream = np.zeros_like(logits)
    upstream[target_class] = 1.0
    alpha = model_backward(model, cache, upstream).conv2_out
    activations = cache.conv2_out[0]
    values = gradcam_from_activations(activations, alpha, window)
    _, height, width = model.spec.family.shape
    return Heatmap(values=values, upsampled=upsample_nearest(values, (height, width)), target_class=target_class)


def normalize_heatmap(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]. A constant map becomes all ones if positive, all zeros otherwise."""
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.full(values.shape, 1.0 if hi > 0.0 else 0.0)


def hot_ramp(t: np.ndarray) -> np.ndarray:
    """RGB of matplotlib's 256-entry "hot" colormap (black, red, yellow, white) for values in [0, 1]."""
    return colormaps[OVERLAY_CMAP](np.asarray(t, dtype=np.float64))[..., :3]


def render_overlay(heatmap: Heatmap, original_image: np.ndarray) -> np.ndarray:
    """Blend the coloured heatmap over the grayscale original at 50%.

    Args:
        heatmap: Heatmap whose upsampled map matches the image size
        original_image: Grayscale image in [0, 1], shape (H, W) or (1, H, W)

    Returns:
        uint8 RGB array of shape (H, W, 3)

    Raises:
        ShapeError: If the sizes differ
    """
    gray = np.asarray(original_image, dtype=np.float64)
    if gray.ndim == 3 and gray.shape[0] == 1:
        gray = gray[0]
    if gray.shape != heatmap.upsampled.shape:
        raise ShapeError(f"image {gray.shape} does not match heatmap {heatmap.upsampled.shape}")
    color = hot_ramp(normalize_heatmap(heatmap.upsampled))
    blended = OVERLAY_ALPHA * color + (1.0 - OVERLAY_ALPHA) * gray[..., None]
    return np.clip(np.rint(blended * 255.0), 0, 255).astype(np.uint8)


def heatmap_to_gray(heatmap: Heatmap) -> np.ndarray:
    """The raw map (at input resolution) as 8-bit gray levels, for PGM export."""
    return np.clip(np.rint(normalize_heatmap(heatmap.upsampled) * 255.0), 0, 255).astype(np.uint8)


def class_mass_dominance(
    model: Model,
    pixels: np.ndarray,
    n_samples: int = 50,
    confidence: float = 0.9,
    window: int = DEFAULT_WINDOW,
) -> Tuple[int, int]:
    """Count confidently classified images whose predicted-class map outweighs the other class's.

    Images are scanned in order; one counts as confident when its predicted-class
    softmax probability is at least ``confidence``. Scanning stops after
    ``n_samples`` confident images.

    Returns:
        (images where mass(predicted) >= mass(other), confident images examined)
    """
    dominant = examined = 0
    for image in pixels:
        if examined >= n_samples:
            break
        logits, _ = model_forward(model, image)
        probs = softmax(logits)
        predicted = int(np.argmax(probs))
        if probs[predicted] < confidence:
            continue
        examined += 1
        own = gradcam(model, image, predicted, window).mass
        other = gradcam(model, image, 1 - predicted, window).mass
        dominant += int(own >= other)
    logger.info("predicted-class map dominates on %d of %d confident images", dominant, examined)
    return dominant, examined
