"""The 4-qubit variational circuit and its exact gradients.

Circuit, in time order, for features x and trainable angles theta:

    |psi1> = H on every wire of |0000>
    |psi2> = U1(2 * x[i]) on wire i
    |psi3> = CX(0,1), CX(1,2), CX(2,3)          entangling chain
    |psi4> = RY(theta[i]) on wire i
    |psi5> = CX(2,3), CX(1,2), CX(0,1)          disentangling chain (reverse order)
    |psi6> = H on wire 0

The classical output is (<Z0>, <Z1>, <Z2>, <Z3>) of |psi6>, computed exactly
from the statevector.

Gradients are computed by adjoint (reverse-mode) differentiation through the
statevector; ``vqc_parameter_shift`` evaluates the same gradients with the
two-term shift rule and is used both for cross-checks and as an alternative
training rule. All functions accept a single feature vector of shape (4,) or
a batch of shape (N, 4); theta is shared across the batch, so its gradient is
summed over the batch.
"""

from dataclasses import dataclass
import math
from typing import List, Tuple

import numpy as np

from lcqhnn.dataclass import GradientMethod
from lcqhnn.errors import NumericalError, ShapeError
from lcqhnn.qsim import (
    HADAMARD,
    apply_1q_array,
    apply_cnot_array,
    apply_phase_array,
    bit_mask,
    ry_derivative_matrix,
    ry_matrix,
    z_signs,
)

N_QUBITS = 4
ENTANGLE_CHAIN = ((0, 1), (1, 2), (2, 3))
DISENTANGLE_CHAIN = ((2, 3), (1, 2), (0, 1))
PSI2_STAGE = 2
PSI4_STAGE = 4


def _finite_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (N_QUBITS,):
        raise ShapeError(f"{name} must hold exactly {N_QUBITS} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} must be finite, got {arr.tolist()}")
    return arr


@dataclass
class VqcParams:
    """The four trainable RY angles (radians)."""
    theta: np.ndarray

    def __post_init__(self) -> None:
        self.theta = _finite_vector(self.theta, "theta").copy()

    @classmethod
    def random(cls, rng: np.random.Generator) -> "VqcParams":
        """Angles drawn uniformly from [0, pi)."""
        return cls(rng.uniform(0.0, math.pi, size=N_QUBITS))


@dataclass
class VqcFeatures:
    """The four classical features fed into the encoding layer."""
    x: np.ndarray

    def __post_init__(self) -> None:
        self.x = _finite_vector(self.x, "x").copy()


def _theta_of(params) -> np.ndarray:
    if isinstance(params, VqcParams):
        return params.theta
    return _finite_vector(params, "theta")


def _features_batch(x) -> Tuple[np.ndarray, bool]:
    """Return features as an (N, 4) array and whether the input was a single vector."""
    if isinstance(x, VqcFeatures):
        x = x.x
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != N_QUBITS:
        raise ShapeError(f"features must have shape (4,) or (N, 4), got {arr.shape}")
    if not np.all(np.isfinite(batch)):
        raise NumericalError("features must be finite")
    return batch, single


def _uniform_superposition(batch: int) -> np.ndarray:
    """|psi1> = H^{(x)4}|0000> for every sample: all 16 amplitudes 1/4."""
    return np.full((batch, 1 << N_QUBITS), 1.0 / math.sqrt(1 << N_QUBITS), dtype=np.complex128)


def _run_stages(x_batch: np.ndarray, theta: np.ndarray) -> List[np.ndarray]:
    """Amplitudes of |psi1> .. |psi6>, each of shape (N, 16)."""
    psi1 = _uniform_superposition(x_batch.shape[0])

    psi2 = psi1
    for q in range(N_QUBITS):
        psi2 = apply_phase_array(psi2, N_QUBITS, q, 2.0 * x_batch[:, q])

    psi3 = psi2
    for control, target in ENTANGLE_CHAIN:
        psi3 = apply_cnot_array(psi3, N_QUBITS, control, target)

    psi4 = psi3
    for q in range(N_QUBITS):
        psi4 = apply_1q_array(psi4, N_QUBITS, q, ry_matrix(theta[q]))

    psi5 = psi4
    for control, target in DISENTANGLE_CHAIN:
        psi5 = apply_cnot_array(psi5, N_QUBITS, control, target)

    psi6 = apply_1q_array(psi5, N_QUBITS, 0, HADAMARD)
    return [psi1, psi2, psi3, psi4, psi5, psi6]


def _measure(amps: np.ndarray) -> np.ndarray:
    """Exact <Z_j> for every wire: (N, 16) -> (N, 4)."""
    probs = np.abs(amps) ** 2
    signs = np.stack([z_signs(N_QUBITS, q) for q in range(N_QUBITS)], axis=1)
    return probs @ signs


def vqc_states(x, params) -> List[np.ndarray]:
    """Return |psi1> .. |psi6> (index 0 holds |psi1>).

    Each entry has shape (16,) for a single feature vector, (N, 16) for a batch.
    """
    x_batch, single = _features_batch(x)
    stages = _run_stages(x_batch, _theta_of(params))
    return [s[0] for s in stages] if single else stages


def vqc_forward(x, params) -> np.ndarray:
    """Run the circuit and return the per-wire Z expectations.

    Args:
        x: Features, shape (4,) or (N, 4)
        params: VqcParams or four angles

    Returns:
        Expectations in [-1, 1], shape (4,) or (N, 4)

    Raises:
        ShapeError: On wrong input shapes
        NumericalError: On non-finite inputs
    """
    x_batch, single = _features_batch(x)
    out = _measure(_run_stages(x_batch, _theta_of(params))[-1])
    return out[0] if single else out


def _upstream_batch(upstream, batch: int, single: bool) -> np.ndarray:
    up = np.asarray(upstream, dtype=np.float64)
    expected = (N_QUBITS,) if single else (batch, N_QUBITS)
    if up.shape != expected:
        raise ShapeError(f"upstream gradient must have shape {expected}, got {up.shape}")
    if not np.all(np.isfinite(up)):
        raise NumericalError("upstream gradient must be finite")
    return up.reshape(batch, N_QUBITS)


def _overlap(lam: np.ndarray, dphi: np.ndarray) -> np.ndarray:
    """2 Re <lam|dphi> per sample."""
    return 2.0 * np.sum((lam.conj() * dphi).real, axis=-1)


def vqc_backward(x, params, upstream) -> Tuple[np.ndarray, np.ndarray]:
    """Exact gradients of L = sum_j upstream_j * <Z_j> by adjoint differentiation.

    The final state is walked backwards gate by gate while a co-state
    lam = (gates after g)^dagger O |psi6>, O = sum_j upstream_j Z_j, is carried
    alongside; each parametrized gate contributes 2 Re <lam| dG |phi_before>.

    Args:
        x: Features, shape (4,) or (N, 4)
        params: VqcParams or four angles
        upstream: dL/d<Z_j>, same shape as the forward output

    Returns:
        (grad_x, grad_theta); grad_x has the shape of x, grad_theta shape (4,)
    """
    x_batch, single = _features_batch(x)
    theta = _theta_of(params)
    up = _upstream_batch(upstream, x_batch.shape[0], single)
    delta = 2.0 * x_batch

    phi = _run_stages(x_batch, theta)[-1]
    observable = up @ np.stack([z_signs(N_QUBITS, q) for q in range(N_QUBITS)], axis=0)
    lam = phi * observable

    grad_theta = np.zeros(N_QUBITS)
    grad_delta = np.zeros_like(delta)

    # final H on wire 0 (self-inverse)
    phi = apply_1q_array(phi, N_QUBITS, 0, HADAMARD)
    lam = apply_1q_array(lam, N_QUBITS, 0, HADAMARD)

    for control, target in reversed(DISENTANGLE_CHAIN):
        phi = apply_cnot_array(phi, N_QUBITS, control, target)
        lam = apply_cnot_array(lam, N_QUBITS, control, target)

    for q in reversed(range(N_QUBITS)):
        undo = ry_matrix(-theta[q])
        phi = apply_1q_array(phi, N_QUBITS, q, undo)
        dphi = apply_1q_array(phi, N_QUBITS, q, ry_derivative_matrix(theta[q]))
        grad_theta[q] = float(np.sum(_overlap(lam, dphi)))
        lam = apply_1q_array(lam, N_QUBITS, q, undo)

    for control, target in reversed(ENTANGLE_CHAIN):
        phi = apply_cnot_array(phi, N_QUBITS, control, target)
        lam = apply_cnot_array(lam, N_QUBITS, control, target)

    for q in reversed(range(N_QUBITS)):
        phi = apply_phase_array(phi, N_QUBITS, q, -delta[:, q])
        # d/d delta of diag(1, e^{i delta}) is diag(0, i e^{i delta})
        dphi = np.zeros_like(phi)
        mask = bit_mask(N_QUBITS, q)
        dphi[:, mask] = phi[:, mask] * (1j * np.exp(1j * delta[:, q]))[:, None]
        grad_delta[:, q] = _overlap(lam, dphi)
        lam = apply_phase_array(lam, N_QUBITS, q, -delta[:, q])

    grad_x = 2.0 * grad_delta
    return (grad_x[0] if single else grad_x), grad_theta


def vqc_parameter_shift(x, params, upstream) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of L = sum_j upstream_j * <Z_j> by the two-term shift rule.

    RY(theta) is shifted by +-pi/2. U1(delta) equals RZ(delta) up to a global
    phase, so delta is shifted by +-pi/2 as well, i.e. x by +-pi/4; the factor
    2 of delta = 2x cancels the 1/2 of the rule.

    Returns:
        (grad_x, grad_theta) with the shapes of vqc_backward
    """
    x_batch, single = _features_batch(x)
    theta = _theta_of(params)
    up = _upstream_batch(upstream, x_batch.shape[0], single)

    def loss(xs: np.ndarray, th: np.ndarray) -> np.ndarray:
        return np.sum(up * _measure(_run_stages(xs, th)[-1]), axis=-1)

    grad_theta = np.zeros(N_QUBITS)
    for q in range(N_QUBITS):
        shift = np.zeros(N_QUBITS)
        shift[q] = math.pi / 2.0
        grad_theta[q] = float(np.sum(loss(x_batch, theta + shift) - loss(x_batch, theta - shift)) / 2.0)

    grad_x = np.zeros_like(x_batch)
    for q in range(N_QUBITS):
        shift = np.zeros(N_QUBITS)
        shift[q] = math.pi / 4.0
        grad_x[:, q] = loss(x_batch + shift, theta) - loss(x_batch - shift, theta)

    return (grad_x[0] if single else grad_x), grad_theta


def vqc_gradients(x, params, upstream, method: GradientMethod = GradientMethod.ADJOINT):
    """Dispatch to the adjoint or parameter-shift gradient."""
    if method is GradientMethod.PARAMETER_SHIFT:
        return vqc_parameter_shift(x, params, upstream)
    return vqc_backward(x, params, upstream)
