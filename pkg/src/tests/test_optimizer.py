import numpy as np
import pytest

from lcqhnn.errors import NumericalError, ShapeError
from lcqhnn.optimizer import AdamState, adam_step


def test_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -4.0, 1e-3])}
    updated, state = adam_step(params, grads, AdamState(), lr=0.01)
    # bias-corrected first step is lr * g / (|g| + eps)
    np.testing.assert_allclose(updated["w"], params["w"] - 0.01 * np.sign(grads["w"]), atol=1e-6)
    assert state.step == 1


def test_inputs_not_modified():
    params = {"w": np.array([1.0, 2.0])}
    grads = {"w": np.array([1.0, 1.0])}
    before = params["w"].copy()
    adam_step(params, grads, AdamState(), lr=0.1)
    np.testing.assert_array_equal(params["w"], before)


def test_minimizes_a_quadratic():
    target = np.array([3.0, -1.0, 0.25])
    params = {"x": np.zeros(3)}
    state = AdamState()
    for _ in range(2000):
        params, state = adam_step(params, {"x": 2 * (params["x"] - target)}, state, lr=0.05)
    np.testing.assert_allclose(params["x"], target, atol=1e-2)


def test_state_is_per_parameter():
    params = {"a": np.zeros(2), "b": np.zeros((2, 2))}
    grads = {"a": np.ones(2), "b": -np.ones((2, 2))}
    _, state = adam_step(params, grads, AdamState(), lr=0.1)
    assert set(state.m) == {"a", "b"}
    assert state.m["b"].shape == (2, 2)


def test_mismatches_rejected():
    with pytest.raises(ShapeError):
        adam_step({"a": np.zeros(2)}, {"b": np.zeros(2)}, AdamState(), lr=0.1)
    with pytest.raises(ShapeError):
        adam_step({"a": np.zeros(2)}, {"a": np.zeros(3)}, AdamState(), lr=0.1)


def test_non_finite_gradient_rejected():
    state = AdamState()
    with pytest.raises(NumericalError):
        adam_step({"a": np.zeros(2)}, {"a": np.array([np.nan, 0.0])}, state, lr=0.1)
    assert state.step == 0


def test_zero_gradient_leaves_parameters_unchanged():
    params = {"w": np.array([0.7, -1.3, 0.0])}
    state = AdamState()
    for _ in range(3):
        updated, state = adam_step(params, {"w": np.zeros(3)}, state, lr=0.1)
        np.testing.assert_array_equal(updated["w"], params["w"])
        params = updated


def test_three_step_trace():
    params = {"w": np.array([1.0])}
    state = AdamState()
    trace = []
    for g in (0.5, -0.25, 1.0):
        params, state = adam_step(params, {"w": np.array([g])}, state, lr=0.1)
        trace.append(float(params["w"][0]))
    # m: 0.05, 0.02, 0.118; v: 2.5e-4, 3.1225e-4, 1.31193775e-3
    np.testing.assert_allclose(trace, [0.900000002, 0.873366298, 0.807555138], atol=1e-7)
    assert state.m["w"][0] == pytest.approx(0.118, rel=1e-12)
    assert state.v["w"][0] == pytest.approx(1.31193775e-3, rel=1e-12)
    assert state.step == 3
