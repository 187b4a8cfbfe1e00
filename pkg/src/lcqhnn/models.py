"""LCQHNN and the CNN-4/8/16 baselines on a shared feature extractor.

Every model is

    conv1(C -> 8) -> ReLU -> pool -> conv2(8 -> 16) -> ReLU -> pool -> flatten
    -> transition dense (flatten -> 4) -> dropout -> head -> 2 logits

and only the head differs:

    lcqhnn   VQC(4 wires) -> FC(4 -> 2)
    cnn4     FC(4 -> 1) -> FC(1 -> 2)
    cnn8     FC(4 -> 2) -> FC(2 -> 2)
    cnn16    FC(4 -> 4) -> FC(4 -> 2)

The two FC layers of a classical head are stacked without an activation in
between, as in the architecture table the baselines are taken from.

Parameters live in a flat name -> array dictionary (see ``param_shapes``),
which is also the layout of the optimizer state and of checkpoint files.
"""

from dataclasses import dataclass, field
import enum
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from lcqhnn.checkpoint import read_checkpoint, write_checkpoint
from lcqhnn.dataclass import DatasetName, GradientMethod, HeadKind, ImageFamily, parse_enum
from lcqhnn.errors import DataFormatError, ShapeError, StaleCacheError, UsageError
from lcqhnn.layers import (
    KERNEL_SIZE,
    ConvLayer,
    DenseLayer,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout,
    dropout_backward,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    uniform_init,
)
from lcqhnn.utils import STREAM_INIT, make_rng
from lcqhnn.vqc import N_QUBITS, VqcParams, vqc_forward, vqc_gradients

logger = logging.getLogger(__name__)

CONV1_CHANNELS = 8
CONV2_CHANNELS = 16
N_FEATURES = N_QUBITS
N_CLASSES = 2

HEAD_LAYERS = {
    HeadKind.LCQHNN: ((4, 2),),
    HeadKind.CNN4: ((4, 1), (1, 2)),
    HeadKind.CNN8: ((4, 2), (2, 2)),
    HeadKind.CNN16: ((4, 4), (4, 2)),
}

Params = Dict[str, np.ndarray]


class ParameterConvention(enum.Enum):
    """What count_parameters counts."""
    WEIGHTS_ONLY_HEAD = "weights_only_head"  # head weights (and RY angles), no biases
    FULL = "full"                            # every trainable scalar


def _spatial_after_extractor(size: int) -> int:
    for _ in range(2):
        size = (size - KERNEL_SIZE + 1) // 2
    return size


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of one classifier.

    Attributes:
        head_kind: Which head follows the transition layer
        family: Input layout, fixes the conv1 input channels and the flatten size
        dropout_rate: Dropout probability after the transition layer
    """
    head_kind: HeadKind
    family: ImageFamily = ImageFamily.GRAYSCALE_28
    dropout_rate: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "head_kind", parse_enum(HeadKind, self.head_kind))
        object.__setattr__(self, "family", parse_enum(ImageFamily, self.family))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")

    @classmethod
    def for_dataset(cls, head_kind: HeadKind, dataset: DatasetName, dropout_rate: float = 0.5) -> "ModelSpec":
        return cls(head_kind, dataset.family, dropout_rate)

    @property
    def in_channels(self) -> int:
        return self.family.shape[0]

    @property
    def flatten_size(self) -> int:
        """400 for 28x28 inputs, 576 for 32x32 inputs."""
        _, h, w = self.family.shape
        return CONV2_CHANNELS * _spatial_after_extractor(h) * _spatial_after_extractor(w)

    @property
    def head_layers(self) -> Tuple[Tuple[int, int], ...]:
        """(in, out) of each head FC layer, in forward order."""
        return HEAD_LAYERS[self.head_kind]

    @property
    def is_quantum(self) -> bool:
        return self.head_kind is HeadKind.LCQHNN


def param_shapes(spec: ModelSpec) -> Dict[str, Tuple[int, ...]]:
    """Name -> shape of every trainable array, in initialization order."""
    k = KERNEL_SIZE
    shapes: Dict[str, Tuple[int, ...]] = {
        "conv1.weight": (CONV1_CHANNELS, spec.in_channels, k, k),
        "conv1.bias": (CONV1_CHANNELS,),
        "conv2.weight": (CONV2_CHANNELS, CONV1_CHANNELS, k, k),
        "conv2.bias": (CONV2_CHANNELS,),
        "transition.weight": (N_FEATURES, spec.flatten_size),
        "transition.bias": (N_FEATURES,),
    }
    if spec.is_quantum:
        shapes["vqc.theta"] = (N_QUBITS,)
    for i, (n_in, n_out) in enumerate(spec.head_layers, start=1):
        shapes[f"head.fc{i}.weight"] = (n_out, n_in)
        shapes[f"head.fc{i}.bias"] = (n_out,)
    return shapes


def count_parameters(spec: ModelSpec, convention: Union[ParameterConvention, str]) -> int:
    """Count trainable parameters.

    ``weights_only_head`` counts head FC weights plus the four RY angles of the
    quantum head, excluding biases (cnn4 6, cnn8 12, cnn16 24, lcqhnn 12).
    ``full`` counts every trainable scalar of the model.
    """
    convention = parse_enum(ParameterConvention, convention)
    if convention is ParameterConvention.FULL:
        return int(sum(np.prod(shape) for shape in param_shapes(spec).values()))
    total = sum(n_in * n_out for n_in, n_out in spec.head_layers)
    if spec.is_quantum:
        total += N_QUBITS
    return total


@dataclass
class Model:
    """Parameters of one classifier plus a version counter.

    The version advances on every parameter update; a forward cache records the
    version it was computed under, so a backward pass with an outdated cache
    is detected.
    """
    spec: ModelSpec
    params: Params
    version: int = 0

    def __post_init__(self) -> None:
        self._check(self.params)

    def _check(self, params: Params) -> None:
        expected = param_shapes(self.spec)
        if set(params) != set(expected):
            raise ShapeError(f"parameter names {sorted(params)} do not match {sorted(expected)}")
        for name, shape in expected.items():
            if np.shape(params[name]) != shape:
                raise ShapeError(f"parameter {name} has shape {np.shape(params[name])}, expected {shape}")

    def set_params(self, params: Params) -> None:
        self._check(params)
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}
        self.version += 1

    def conv(self, name: str) -> ConvLayer:
        return ConvLayer(self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    def dense(self, name: str) -> DenseLayer:
        return DenseLayer(self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    @property
    def vqc_params(self) -> VqcParams:
        return VqcParams(self.params["vqc.theta"])


def init_model(spec: ModelSpec, seed: int) -> Model:
    """Seeded initialization.

    Classical weights uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)], biases zero,
    RY angles uniform in [0, pi). All draws come from the run seed's init stream.
    """
    rng = make_rng(seed, STREAM_INIT)
    params: Params = {}
    for name, shape in param_shapes(spec).items():
        if name == "vqc.theta":
            params[name] = VqcParams.random(rng).theta
        elif name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            params[name] = uniform_init(rng, shape, int(np.prod(shape[1:])))
    logger.debug("initialized %s model (%d parameters)", spec.head_kind.value, count_parameters(spec, "full"))
    return Model(spec, params)


@dataclass
class ForwardCache:
    """Activations of one forward pass, batched (leading sample axis).

    ``conv2_out`` is the last convolutional layer's output before its ReLU,
    the target layer of Grad-CAM.
    """
    version: int
    single: bool
    images: np.ndarray
    conv1_out: np.ndarray
    relu1: np.ndarray
    pool1_argmax: np.ndarray
    pool1: np.ndarray
    conv2_out: np.ndarray
    relu2: np.ndarray
    pool2_argmax: np.ndarray
    pool2: np.ndarray
    flat: np.ndarray
    features: np.ndarray
    dropout_mask: Optional[np.ndarray]
    head_inputs: List[np.ndarray] = field(default_factory=list)
    vqc_in: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None


@dataclass
class ModelGradients:
    """Result of model_backward.

    Attributes:
        params: Gradient per parameter name, summed over the batch
        conv2_out: Gradient with respect to the pre-ReLU conv2 output
    """
    params: Params
    conv2_out: np.ndarray


def _images_batch(spec: ModelSpec, images: np.ndarray) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(images, dtype=np.float64)
    single = arr.ndim == 3
    batch = arr[None] if single else arr
    if batch.ndim != 4 or batch.shape[1:] != spec.family.shape:
        raise ShapeError(f"model expects images of shape {spec.family.shape}, got {arr.shape}")
    return batch, single


def model_forward(
    model: Model,
    images: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """Run the classifier.

    Args:
        model: Parameters and architecture
        images: One image (C, H, W) or a batch (N, C, H, W)
        training: Apply dropout (needs rng)
        rng: Dropout random stream

    Returns:
        (logits of shape (2,) or (N, 2), cache for model_backward)

    Raises:
        ShapeError: If the images do not match the model's input family
    """
    spec = model.spec
    x, single = _images_batch(spec, images)

    conv1_out = conv2d_forward(x, model.conv("conv1"))
    relu1 = relu(conv1_out)
    pool1, pool1_argmax = maxpool2(relu1)
    conv2_out = conv2d_forward(pool1, model.conv("conv2"))
    relu2 = relu(conv2_out)
    pool2, pool2_argmax = maxpool2(relu2)
    flat = pool2.reshape(pool2.shape[0], -1)
    features = dense_forward(flat, model.dense("transition"))
    features, mask = dropout(features, spec.dropout_rate, training, rng)

    cache = ForwardCache(
        version=model.version,
        single=single,
        images=x,
        conv1_out=conv1_out,
        relu1=relu1,
        pool1_argmax=pool1_argmax,
        pool1=pool1,
        conv2_out=conv2_out,
        relu2=relu2,
        pool2_argmax=pool2_argmax,
        pool2=pool2,
        flat=flat,
        features=features,
        dropout_mask=mask,
    )

    h = features
    if spec.is_quantum:
        cache.vqc_in = h
        h = vqc_forward(h, model.vqc_params)
    for i in range(1, len(spec.head_layers) + 1):
        cache.head_inputs.append(h)
        h = dense_forward(h, model.dense(f"head.fc{i}"))
    cache.logits = h
    return (h[0] if single else h), cache


def model_backward(
    model: Model,
    cache: Optional[ForwardCache],
    grad_logits: np.ndarray,
    gradient_method: GradientMethod = GradientMethod.ADJOINT,
) -> ModelGradients:
    """Back-propagate dL/dlogits through head, transition and extractor.

    For the quantum head the circuit's input gradients are chained into the
    transition layer; its angle gradients land in ``vqc.theta``.

    Raises:
        StaleCacheError: If the cache is missing or predates a parameter update
        ShapeError: If grad_logits does not match the cached logits
    """
    if cache is None:
        raise StaleCacheError("model_backward needs the cache of a forward pass")
    if cache.version != model.version:
        raise StaleCacheError(
            f"forward cache was computed at parameter version {cache.version}, model is at {model.version}"
        )
    spec = model.spec
    g = np.asarray(grad_logits, dtype=np.float64)
    if cache.single:
        g = g[None]
    if g.shape != cache.logits.shape:
        raise ShapeError(f"grad_logits must have shape {cache.logits.shape}, got {g.shape}")

    grads: Params = {}
    for i in range(len(spec.head_layers), 0, -1):
        name = f"head.fc{i}"
        g, grads[f"{name}.weight"], grads[f"{name}.bias"] = dense_backward(
            cache.head_inputs[i - 1], model.dense(name), g
        )
    if spec.is_quantum:
        g, grads["vqc.theta"] = vqc_gradients(cache.vqc_in, model.vqc_params, g, gradient_method)

    g = dropout_backward(g, cache.dropout_mask)
    g, grads["transition.weight"], grads["transition.bias"] = dense_backward(
        cache.flat, model.dense("transition"), g
    )
    g = maxpool2_backward(cache.relu2, cache.pool2_argmax, g.reshape(cache.pool2.shape))
    grad_conv2_out = relu_backward(cache.conv2_out, g)
    g, grads["conv2.weight"], grads["conv2.bias"] = conv2d_backward(cache.pool1, model.conv("conv2"), grad_conv2_out)
    g = maxpool2_backward(cache.relu1, cache.pool1_argmax, g)
    g = relu_backward(cache.conv1_out, g)
    _, grads["conv1.weight"], grads["conv1.bias"] = conv2d_backward(cache.images, model.conv("conv1"), g)

    return ModelGradients(params=grads, conv2_out=grad_conv2_out[0] if cache.single else grad_conv2_out)


# ---------- checkpoints ----------

def save_model(
    path: Union[str, Path],
    model: Model,
    dataset: DatasetName,
    epoch: int,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write the model parameters with a header naming head kind, dataset and epoch."""
    metadata: Dict[str, Any] = {
        "head_kind": model.spec.head_kind.value,
        "dataset": dataset.value,
        "family": list(model.spec.family.shape),
        "epoch": int(epoch),
        "dropout_rate": model.spec.dropout_rate,
    }
    if extra:
        metadata.update(extra)
    return write_checkpoint(path, model.params, metadata)


def load_model(path: Union[str, Path]) -> Tuple[Model, Dict[str, Any]]:
    """Read a checkpoint written by save_model.

    Returns:
        (model, header metadata)

    Raises:
        DataError: Missing file
        DataFormatError: Malformed file or tensors that do not fit the named architecture
    """
    metadata, tensors = read_checkpoint(path)
    try:
        dataset = DatasetName(metadata["dataset"])
        spec = ModelSpec.for_dataset(
            HeadKind(metadata["head_kind"]), dataset, float(metadata.get("dropout_rate", 0.5))
        )
    except (KeyError, ValueError, UsageError) as e:
        raise DataFormatError(f"checkpoint {path} has an invalid header: {e}") from e
    try:
        model = Model(spec, tensors)
    except ShapeError as e:
        raise DataFormatError(f"checkpoint {path} does not match a {spec.head_kind.value} model: {e}") from e
    logger.info("loaded %s checkpoint %s (epoch %s)", spec.head_kind.value, path, metadata.get("epoch"))
    return model, metadata
