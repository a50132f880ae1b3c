import numpy as np
import pytest
from parameterized import parameterized

from cellarium.warp import exceptions
from cellarium.warp.training import Adam, AdamState, adam_step


def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0]), "b": np.array([0.5])}
    state = AdamState.zeros_like(params)
    updated, state = adam_step(params, {"w": np.zeros(2), "b": np.zeros(1)}, state, lr=0.1)

    np.testing.assert_array_equal(updated["w"], params["w"])
    np.testing.assert_array_equal(updated["b"], params["b"])
    np.testing.assert_array_equal(state.m["w"], 0)
    np.testing.assert_array_equal(state.v["w"], 0)
    assert state.step == 1


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, 1.0, 1.0])}
    grads = {"w": np.array([3.0, -0.01, 200.0])}
    updated, _ = adam_step(params, grads, AdamState.zeros_like(params), lr=0.01)

    np.testing.assert_allclose(updated["w"] - params["w"], -0.01 * np.sign(grads["w"]), rtol=1e-5)


def test_adam_constant_gradient_converges_to_sign_step():
    params = {"w": np.zeros(2)}
    state = AdamState.zeros_like(params)
    grads = {"w": np.array([0.2, -5.0])}
    for _ in range(2000):
        previous = params["w"]
        params, state = adam_step(params, grads, state, lr=0.001)
    np.testing.assert_allclose(params["w"] - previous, [-0.001, 0.001], rtol=1e-6)


def test_adam_step_leaves_inputs_untouched():
    params = {"w": np.array([1.0])}
    state = AdamState.zeros_like(params)
    adam_step(params, {"w": np.array([1.0])}, state, lr=0.1)

    assert params["w"][0] == 1.0
    assert state.step == 0
    assert state.m["w"][0] == 0.0


@parameterized.expand([("nan", np.nan), ("inf", np.inf)])
def test_adam_rejects_non_finite_gradients(_, value):
    params = {"w": np.array([1.0, 2.0])}
    with pytest.raises(exceptions.DivergenceError):
        adam_step(params, {"w": np.array([0.0, value])}, AdamState.zeros_like(params), lr=0.1)


def test_adam_rejects_mismatched_gradients():
    params = {"w": np.array([1.0])}
    with pytest.raises(exceptions.DivergenceError):
        adam_step(params, {"v": np.array([1.0])}, AdamState.zeros_like(params), lr=0.1)


def test_adam_state_dict_round_trip():
    params = {"w": np.array([1.0, 2.0])}
    optimizer = Adam(params, lr=0.05)
    for g in ([1.0, -1.0], [0.5, 2.0]):
        params = optimizer.step(params, {"w": np.array(g)})

    restored = Adam({"w": np.zeros(2)}, lr=1.0)
    restored.load_state_dict(optimizer.state_dict())
    assert restored.lr == 0.05
    assert restored.state.step == 2

    grads = {"w": np.array([0.1, 0.1])}
    np.testing.assert_array_equal(restored.step(params, grads)["w"], optimizer.step(params, grads)["w"])


def test_adam_state_dict_is_a_copy():
    params = {"w": np.array([1.0])}
    optimizer = Adam(params, lr=0.1)
    snapshot = optimizer.state_dict()
    optimizer.step(params, {"w": np.array([1.0])})

    assert snapshot["step"] == 0
    np.testing.assert_array_equal(snapshot["m"]["w"], 0)
