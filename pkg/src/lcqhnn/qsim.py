"""Exact dense statevector simulation of few-qubit registers.

Conventions:
    * Qubit 0 is the most significant bit of the basis index, so for four
      qubits the basis state |q0 q1 q2 q3> has index 8*q0 + 4*q1 + 2*q2 + q3.
      A full-register operator is the Kronecker product with qubit 0 leftmost.
    * Amplitudes are complex128. The norm stays 1 within NORM_TOLERANCE after
      any gate sequence; each gate followed by its inverse reproduces the input
      within UNITARY_TOLERANCE per amplitude.

The public operations take and return immutable StateVector values. The
``*_array`` kernels below them work on raw amplitude arrays of shape
``(..., 2**n)`` so that a whole mini-batch of registers is simulated with one
numpy call; the variational circuit module uses them directly.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from lcqhnn.errors import NumericalError, QubitIndexError, ShapeError

MAX_QUBITS = 12
NORM_TOLERANCE = 1e-10
UNITARY_TOLERANCE = 1e-12

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2.0)


def u1_matrix(delta: float) -> np.ndarray:
    """Phase gate diag(1, e^{i delta})."""
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * delta)]], dtype=np.complex128)


def ry_matrix(theta: float) -> np.ndarray:
    """Y rotation [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def ry_derivative_matrix(theta: float) -> np.ndarray:
    """Elementwise derivative of ry_matrix with respect to theta."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return 0.5 * np.array([[-s, -c], [c, -s]], dtype=np.complex128)


@dataclass(frozen=True)
class BlochVector:
    """Single-qubit reduced state as a point on or inside the unit ball."""
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if self.x * self.x + self.y * self.y + self.z * self.z > 1.0 + NORM_TOLERANCE:
            raise NumericalError(f"Bloch vector ({self.x}, {self.y}, {self.z}) lies outside the unit ball")

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.z)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state of an n-qubit register.

    Attributes:
        n_qubits: Register size, 1..MAX_QUBITS
        amplitudes: 2**n_qubits complex amplitudes (stored as a private copy)
    """
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        _check_register_size(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise ShapeError(f"{self.n_qubits} qubits need {1 << self.n_qubits} amplitudes, got {amps.shape[0]}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if not abs(norm - 1.0) <= NORM_TOLERANCE:
            raise NumericalError(f"state is not normalized (sum of |a|^2 = {norm})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        """Build a state from amplitudes, inferring the register size."""
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        n = int(round(math.log2(amps.shape[0]))) if amps.shape[0] > 0 else 0
        if amps.shape[0] == 0 or 1 << n != amps.shape[0]:
            raise ShapeError(f"amplitude count {amps.shape[0]} is not a power of two")
        return cls(n, amps)

    def norm(self) -> float:
        """Sum of squared amplitude magnitudes."""
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


# ---------- validation ----------

def _check_register_size(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise QubitIndexError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _check_qubit(n_qubits: int, qubit: int) -> None:
    if not isinstance(qubit, (int, np.integer)) or not 0 <= qubit < n_qubits:
        raise QubitIndexError(f"qubit index {qubit!r} out of range for a {n_qubits}-qubit register")


def _check_finite(value, name: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"{name} must be finite, got {value!r}")


# ---------- array kernels ----------

@lru_cache(maxsize=None)
def bit_mask(n_qubits: int, qubit: int) -> np.ndarray:
    """Boolean mask over basis indices whose bit for ``qubit`` is 1 (read-only)."""
    indices = np.arange(1 << n_qubits)
    mask = ((indices >> (n_qubits - 1 - qubit)) & 1).astype(bool)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=None)
def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    """+1 where the qubit's bit is 0, -1 where it is 1 (read-only)."""
    signs = 1.0 - 2.0 * bit_mask(n_qubits, qubit)
    signs.setflags(write=False)
    return signs


def apply_1q_array(amps: np.ndarray, n_qubits: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix on one wire of every register in ``amps``.

    Args:
        amps: Amplitudes of shape (..., 2**n_qubits)
        n_qubits: Register size
        qubit: Target wire
        gate: 2x2 matrix

    Returns:
        New amplitude array of the same shape
    """
    batch_shape = amps.shape[:-1]
    axis = len(batch_shape) + qubit
    psi = amps.reshape(batch_shape + (2,) * n_qubits)
    psi = np.moveaxis(psi, axis, -1)
    psi = psi @ gate.T
    psi = np.moveaxis(psi, -1, axis)
    return np.ascontiguousarray(psi).reshape(amps.shape)


def apply_phase_array(amps: np.ndarray, n_qubits: int, qubit: int, delta) -> np.ndarray:
    """Multiply amplitudes whose ``qubit`` bit is 1 by e^{i delta}.

    ``delta`` is a scalar or an array matching the batch shape of ``amps``.
    """
    phase = np.exp(1j * np.asarray(delta, dtype=np.float64))[..., None]
    out = np.array(amps, dtype=np.complex128, copy=True)
    mask = bit_mask(n_qubits, qubit)
    out[..., mask] = out[..., mask] * phase
    return out


def apply_cnot_array(amps: np.ndarray, n_qubits: int, control: int, target: int) -> np.ndarray:
    """Flip the target bit of every amplitude whose control bit is 1."""
    batch_shape = amps.shape[:-1]
    offset = len(batch_shape)
    psi = np.array(amps, dtype=np.complex128, copy=True).reshape(batch_shape + (2,) * n_qubits)
    index = [slice(None)] * psi.ndim
    index[offset + control] = 1
    index = tuple(index)
    # Selecting control=1 removes one axis ahead of the target when control < target
    target_axis = offset + target - (1 if target > control else 0)
    psi[index] = np.flip(psi[index], axis=target_axis).copy()
    return psi.reshape(amps.shape)


def expectation_z_array(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """Exact <Z> of one wire for every register in ``amps`` (shape ``amps.shape[:-1]``)."""
    probs = np.abs(amps) ** 2
    return probs @ z_signs(n_qubits, qubit)


def reduced_density_array(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """2x2 reduced density matrix of one wire (partial trace over all others)."""
    batch_shape = amps.shape[:-1]
    psi = amps.reshape(batch_shape + (2,) * n_qubits)
    psi = np.moveaxis(psi, len(batch_shape) + qubit, -1)
    psi = psi.reshape(batch_shape + (-1, 2))
    return np.einsum("...ra,...rb->...ab", psi, psi.conj())


def bloch_array(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """Bloch coordinates (x, y, z) of one wire, shape ``amps.shape[:-1] + (3,)``."""
    rho = reduced_density_array(amps, n_qubits, qubit)
    x = 2.0 * rho[..., 0, 1].real
    y = 2.0 * rho[..., 1, 0].imag
    z = (rho[..., 0, 0] - rho[..., 1, 1]).real
    return np.stack([x, y, z], axis=-1)


# ---------- public operations ----------

def init_zero(n_qubits: int) -> StateVector:
    """Return |0...0> on ``n_qubits`` wires.

    Raises:
        QubitIndexError: If n_qubits is outside [1, MAX_QUBITS]
    """
    _check_register_size(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_h(state: StateVector, qubit: int) -> StateVector:
    """Apply a Hadamard on ``qubit``."""
    _check_qubit(state.n_qubits, qubit)
    return StateVector(state.n_qubits, apply_1q_array(state.amplitudes, state.n_qubits, qubit, HADAMARD))


def apply_u1(state: StateVector, qubit: int, delta: float) -> StateVector:
    """Apply the phase gate diag(1, e^{i delta}) on ``qubit``."""
    _check_qubit(state.n_qubits, qubit)
    _check_finite(delta, "delta")
    return StateVector(state.n_qubits, apply_phase_array(state.amplitudes, state.n_qubits, qubit, delta))


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Apply RY(theta) on ``qubit``."""
    _check_qubit(state.n_qubits, qubit)
    _check_finite(theta, "theta")
    return StateVector(state.n_qubits, apply_1q_array(state.amplitudes, state.n_qubits, qubit, ry_matrix(theta)))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Apply CNOT with the given control and target wires.

    Raises:
        QubitIndexError: If a wire is out of range or control == target
    """
    _check_qubit(state.n_qubits, control)
    _check_qubit(state.n_qubits, target)
    if control == target:
        raise QubitIndexError(f"CNOT control and target must differ, both are {control}")
    return StateVector(state.n_qubits, apply_cnot_array(state.amplitudes, state.n_qubits, control, target))


def expectation_z(state: StateVector, qubit: int) -> float:
    """Exact Pauli-Z expectation of ``qubit``, in [-1, 1]; no sampling."""
    _check_qubit(state.n_qubits, qubit)
    return float(expectation_z_array(state.amplitudes, state.n_qubits, qubit))


def bloch_vector(state: StateVector, qubit: int) -> BlochVector:
    """Bloch vector of ``qubit`` after tracing out every other wire."""
    _check_qubit(state.n_qubits, qubit)
    x, y, z = bloch_array(state.amplitudes, state.n_qubits, qubit)
    return BlochVector(float(x), float(y), float(z))
