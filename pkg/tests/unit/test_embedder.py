import numpy as np
import pytest
from parameterized import parameterized
from pydantic import ValidationError

from cellarium.warp import constants, exceptions
from cellarium.warp.gradcheck import numerical_gradient, relative_error
from cellarium.warp.loss import LabeledBatch, LossConfig, ProxySet, batch_loss_grad
from cellarium.warp.training import EmbedderSpec, backward, forward, init_params


@parameterized.expand(
    [
        ("single_width", [3]),
        ("zero_width", [3, 0]),
        ("negative_width", [3, -2, 2]),
    ]
)
def test_embedder_spec_validation(_, widths):
    with pytest.raises(ValidationError):
        EmbedderSpec(layer_widths=widths)


def test_parameter_shapes():
    spec = EmbedderSpec(layer_widths=[4, 8, 2], layer_norm_output=True)
    assert spec.parameter_shapes() == {
        "W0": (4, 8),
        "b0": (8,),
        "W1": (8, 2),
        "b1": (2,),
        "ln_gain": (2,),
        "ln_bias": (2,),
    }
    assert spec.num_layers == 2
    assert spec.embedding_dim == 2


def test_init_params():
    spec = EmbedderSpec(layer_widths=[400, 300, 2], layer_norm_output=True)
    params = init_params(spec, seed=0)

    assert params["W0"].std() == pytest.approx(1 / 20, rel=0.05)
    assert params["W1"].std() == pytest.approx(1 / np.sqrt(300), rel=0.1)
    np.testing.assert_array_equal(params["b0"], 0)
    np.testing.assert_array_equal(params["ln_gain"], 1)
    np.testing.assert_array_equal(params["ln_bias"], 0)
    np.testing.assert_array_equal(init_params(spec, seed=0)["W0"], params["W0"])
    assert not np.array_equal(init_params(spec, seed=1)["W0"], params["W0"])


def test_forward_identity_layer():
    spec = EmbedderSpec(layer_widths=[3, 3])
    inputs = np.random.RandomState(0).normal(size=(5, 3))
    params = {"W0": np.eye(3), "b0": np.zeros(3)}
    np.testing.assert_array_equal(forward(spec, params, inputs), inputs)


def test_forward_layer_norm_of_constant_vector_is_bias():
    spec = EmbedderSpec(layer_widths=[2, 3], layer_norm_output=True)
    params = {
        "W0": np.zeros((2, 3)),
        "b0": np.full(3, 5.0),
        "ln_gain": np.array([2.0, 3.0, 4.0]),
        "ln_bias": np.array([1.0, 2.0, 3.0]),
    }
    output = forward(spec, params, np.ones((4, 2)))
    np.testing.assert_array_equal(output, np.tile([1.0, 2.0, 3.0], (4, 1)))


def test_forward_layer_norm_statistics():
    spec = EmbedderSpec(layer_widths=[3, 16, 8], layer_norm_output=True)
    output = forward(spec, init_params(spec, seed=0), np.random.RandomState(0).normal(size=(10, 3)))

    np.testing.assert_allclose(output.mean(axis=1), 0, atol=1e-12)
    np.testing.assert_allclose(output.std(axis=1), 1, atol=1e-3)


@parameterized.expand([("relu", constants.Activation.RELU), ("tanh", constants.Activation.TANH)])
def test_forward_is_deterministic(_, activation):
    spec = EmbedderSpec(layer_widths=[3, 16, 2], activation=activation)
    params = init_params(spec, seed=5)
    inputs = np.random.RandomState(0).normal(size=(7, 3))
    np.testing.assert_array_equal(forward(spec, params, inputs), forward(spec, params, inputs))


def test_forward_rejects_mismatched_shapes():
    spec = EmbedderSpec(layer_widths=[3, 2])
    params = init_params(spec, seed=0)

    with pytest.raises(exceptions.EmbedderError):
        forward(spec, params, np.zeros((4, 2)))
    with pytest.raises(exceptions.EmbedderError):
        forward(spec, {"W0": params["W0"]}, np.zeros((4, 3)))
    with pytest.raises(exceptions.EmbedderError):
        forward(spec, {"W0": params["W0"].T, "b0": params["b0"]}, np.zeros((4, 3)))
    with pytest.raises(exceptions.EmbedderError):
        backward(spec, params, np.zeros((4, 3)), np.zeros((4, 3)))


def test_backward_zero_upstream_gradient():
    spec = EmbedderSpec(layer_widths=[3, 8, 2], layer_norm_output=True)
    params = init_params(spec, seed=0)
    grads = backward(spec, params, np.random.RandomState(0).normal(size=(5, 3)), np.zeros((5, 2)))

    assert grads.keys() == params.keys()
    for name, grad in grads.items():
        assert grad.shape == params[name].shape
        np.testing.assert_array_equal(grad, 0)


def test_backward_single_linear_layer_is_outer_product():
    spec = EmbedderSpec(layer_widths=[3, 2])
    params = init_params(spec, seed=0)
    x = np.array([[1.0, -2.0, 0.5]])
    d_e = np.array([[0.3, -0.7]])
    grads = backward(spec, params, x, d_e)

    np.testing.assert_allclose(grads["W0"], np.outer(x[0], d_e[0]), rtol=1e-15)
    np.testing.assert_allclose(grads["b0"], d_e[0], rtol=1e-15)


@parameterized.expand(
    [
        ("tanh_layer_norm", constants.Activation.TANH, True),
        ("tanh", constants.Activation.TANH, False),
        ("relu", constants.Activation.RELU, False),
    ]
)
def test_end_to_end_gradient_matches_finite_differences(_, activation, layer_norm):
    rng = np.random.RandomState(0)
    spec = EmbedderSpec(layer_widths=[4, 5, 3], activation=activation, layer_norm_output=layer_norm)
    params = init_params(spec, seed=0)
    inputs = rng.normal(size=(6, 4))
    labels = np.array([0, 1, 2, 0, 1, 2])
    proxies = ProxySet(proxies=rng.normal(size=(3, 3)))
    cfg = LossConfig(warp="t - t", temperature=0.5)

    def objective(_: np.ndarray) -> float:
        embeddings = forward(spec, params, inputs)
        return batch_loss_grad(LabeledBatch(embeddings=embeddings, labels=labels), proxies, cfg).loss

    grad = batch_loss_grad(LabeledBatch(embeddings=forward(spec, params, inputs), labels=labels), proxies, cfg)
    analytic = backward(spec, params, inputs, grad.d_embeddings)
    for name in params:
        numeric = numerical_gradient(objective, params[name])
        assert relative_error(analytic[name], numeric) < 1e-4, name
