import math

import numpy as np
import pytest

from lcqhnn.dataclass import GradientMethod
from lcqhnn.errors import NumericalError, ShapeError
from lcqhnn.qsim import bloch_array
from lcqhnn.vqc import (
    N_QUBITS,
    VqcFeatures,
    VqcParams,
    vqc_backward,
    vqc_forward,
    vqc_gradients,
    vqc_parameter_shift,
    vqc_states,
)


def test_zero_features_zero_angles():
    np.testing.assert_allclose(vqc_forward(np.zeros(4), np.zeros(4)), [1, 0, 0, 0], atol=1e-12)


def test_zero_features_pi_on_first_wire():
    out = vqc_forward(np.zeros(4), [math.pi, 0, 0, 0])
    np.testing.assert_allclose(out, [-1, 0, 0, 0], atol=1e-12)


def test_forward_accepts_dataclass_inputs():
    x = VqcFeatures(np.array([0.1, 0.2, 0.3, 0.4]))
    params = VqcParams(np.array([0.5, 0.6, 0.7, 0.8]))
    np.testing.assert_array_equal(vqc_forward(x, params), vqc_forward(x.x, params.theta))


def test_forward_matches_kronecker_oracle(oracle, rng):
    for _ in range(1000):
        x = rng.uniform(-math.pi, math.pi, size=4)
        theta = rng.uniform(-math.pi, math.pi, size=4)
        expected = oracle.expectations(oracle.circuit_state(x, theta))
        np.testing.assert_allclose(vqc_forward(x, theta), expected, atol=1e-12, rtol=0)


def test_final_state_matches_kronecker_oracle(oracle, rng):
    x, theta = rng.normal(size=4), rng.normal(size=4)
    np.testing.assert_allclose(vqc_states(x, theta)[-1], oracle.circuit_state(x, theta), atol=1e-12, rtol=0)


def test_outputs_lie_in_unit_interval(rng):
    out = vqc_forward(rng.normal(scale=3, size=(200, 4)), rng.normal(scale=3, size=4))
    assert np.all(np.abs(out) <= 1.0 + 1e-12)


def test_batch_equals_per_sample(rng):
    xs = rng.normal(size=(7, 4))
    theta = rng.normal(size=4)
    batch = vqc_forward(xs, theta)
    for i in range(7):
        np.testing.assert_allclose(batch[i], vqc_forward(xs[i], theta), atol=1e-14)


def test_states_are_six_stages_starting_uniform(rng):
    states = vqc_states(rng.normal(size=4), rng.normal(size=4))
    assert len(states) == 6
    np.testing.assert_allclose(states[0], np.full(16, 0.25), atol=1e-15)
    for psi in states:
        assert abs(np.sum(np.abs(psi) ** 2) - 1.0) < 1e-10


def test_encoded_qubits_lie_on_equator(rng):
    xs = rng.uniform(-10, 10, size=(100, N_QUBITS))
    psi2 = vqc_states(xs, np.zeros(4))[1]
    for q in range(N_QUBITS):
        coords = bloch_array(psi2, N_QUBITS, q)
        assert np.all(np.abs(coords[:, 2]) < 1e-10)
        assert np.all(np.abs(coords[:, 0] ** 2 + coords[:, 1] ** 2 - 1.0) < 1e-10)
        np.testing.assert_allclose(coords[:, 0], np.cos(2 * xs[:, q]), atol=1e-12)


def test_backward_matches_finite_differences(rng, finite_difference):
    for _ in range(10):
        x, theta, up = rng.normal(size=4), rng.uniform(0, math.pi, size=4), rng.normal(size=4)
        grad_x, grad_theta = vqc_backward(x, theta, up)
        fd_x = finite_difference(lambda v: float(up @ vqc_forward(v, theta)), x)
        fd_theta = finite_difference(lambda t: float(up @ vqc_forward(x, t)), theta)
        np.testing.assert_allclose(grad_x, fd_x, rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(grad_theta, fd_theta, rtol=1e-6, atol=1e-8)


def test_backward_matches_parameter_shift(rng):
    for _ in range(20):
        x, theta, up = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
        adj_x, adj_theta = vqc_backward(x, theta, up)
        ps_x, ps_theta = vqc_parameter_shift(x, theta, up)
        np.testing.assert_allclose(adj_theta, ps_theta, atol=1e-10, rtol=0)
        np.testing.assert_allclose(adj_x, ps_x, atol=1e-10, rtol=0)


def test_batched_theta_gradient_is_summed(rng):
    xs, theta, ups = rng.normal(size=(5, 4)), rng.normal(size=4), rng.normal(size=(5, 4))
    grad_x, grad_theta = vqc_backward(xs, theta, ups)
    singles = [vqc_backward(xs[i], theta, ups[i]) for i in range(5)]
    np.testing.assert_allclose(grad_theta, sum(g for _, g in singles), atol=1e-12)
    np.testing.assert_allclose(grad_x, np.stack([g for g, _ in singles]), atol=1e-12)


def test_gradient_dispatch(rng):
    x, theta, up = rng.normal(size=(3, 4)), rng.normal(size=4), rng.normal(size=(3, 4))
    for method, fn in ((GradientMethod.ADJOINT, vqc_backward), (GradientMethod.PARAMETER_SHIFT, vqc_parameter_shift)):
        got = vqc_gradients(x, theta, up, method)
        want = fn(x, theta, up)
        np.testing.assert_array_equal(got[0], want[0])
        np.testing.assert_array_equal(got[1], want[1])


def test_zero_upstream_gives_zero_gradients(rng):
    grad_x, grad_theta = vqc_backward(rng.normal(size=4), rng.normal(size=4), np.zeros(4))
    assert np.all(grad_x == 0) and np.all(grad_theta == 0)


def test_input_validation():
    with pytest.raises(ShapeError):
        vqc_forward(np.zeros(3), np.zeros(4))
    with pytest.raises(ShapeError):
        vqc_forward(np.zeros(4), np.zeros(5))
    with pytest.raises(ShapeError):
        vqc_backward(np.zeros(4), np.zeros(4), np.zeros((1, 4)))
    with pytest.raises(NumericalError):
        vqc_forward([0, 0, float("nan"), 0], np.zeros(4))
    with pytest.raises(NumericalError):
        VqcParams([0, float("inf"), 0, 0])


def test_random_params_in_range(rng):
    for _ in range(20):
        theta = VqcParams.random(rng).theta
        assert theta.shape == (4,)
        assert np.all((theta >= 0) & (theta < math.pi))


def test_shifting_features_by_pi_leaves_outputs_unchanged(rng):
    x = rng.uniform(0.0, math.pi, size=(6, N_QUBITS))
    theta = rng.uniform(-math.pi, math.pi, size=N_QUBITS)
    np.testing.assert_allclose(vqc_forward(x + math.pi, theta), vqc_forward(x, theta), atol=1e-12)


def test_forward_repeats_bit_identically(rng):
    x = rng.uniform(0.0, math.pi, size=(5, N_QUBITS))
    theta = rng.uniform(-math.pi, math.pi, size=N_QUBITS)
    np.testing.assert_array_equal(vqc_forward(x, theta), vqc_forward(x, theta))
