"""
A small fully connected embedder with hand-written reverse mode.

Parameters are a flat ``name -> array`` mapping: ``W{l}`` of shape ``(fan_in, fan_out)`` and ``b{l}`` for every layer
``l``, plus ``ln_gain`` / ``ln_bias`` when the output is layer-normalised. Inputs are row vectors, so a layer computes
``x @ W + b``.
"""

import typing as t

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.seeding import stream_rng

Params = t.Dict[str, np.ndarray]


class EmbedderSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    layer_widths: t.List[int] = Field(
        description="Widths from the input through the hidden layers to the embedding dimension", examples=[[2, 32, 2]]
    )
    activation: constants.Activation = Field(
        default=constants.Activation.RELU, description="Activation of the hidden layers", examples=["relu"]
    )
    layer_norm_output: bool = Field(default=False, description="Layer-normalise the embeddings", examples=[False])

    @field_validator("layer_widths")
    @classmethod
    def _check_widths(cls, widths: t.List[int]) -> t.List[int]:
        if len(widths) < 2:
            raise ValueError("At least an input and an output width are required")
        if any(width < 1 for width in widths):
            raise ValueError(f"All widths must be positive, got {widths}")
        return widths

    @property
    def num_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_widths[-1]

    def parameter_shapes(self) -> t.Dict[str, t.Tuple[int, ...]]:
        shapes: t.Dict[str, t.Tuple[int, ...]] = {}
        for layer, (fan_in, fan_out) in enumerate(zip(self.layer_widths[:-1], self.layer_widths[1:])):
            shapes[f"W{layer}"] = (fan_in, fan_out)
            shapes[f"b{layer}"] = (fan_out,)
        if self.layer_norm_output:
            shapes["ln_gain"] = (self.embedding_dim,)
            shapes["ln_bias"] = (self.embedding_dim,)
        return shapes


def init_params(spec: EmbedderSpec, seed: int) -> Params:
    """
    Gaussian fan-in initialisation: weights ``N(0, 1 / fan_in)``, zero biases, unit layer-norm gain and zero
    layer-norm bias. Drawn from the model stream of ``seed``.
    """
    rng = stream_rng(seed, constants.RandomStream.MODEL)
    params: Params = {}
    for name, shape in spec.parameter_shapes().items():
        if name.startswith("W"):
            params[name] = rng.normal(scale=1.0 / np.sqrt(shape[0]), size=shape)
        elif name == "ln_gain":
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def _check_params(spec: EmbedderSpec, params: Params) -> None:
    for name, shape in spec.parameter_shapes().items():
        if name not in params:
            raise exceptions.EmbedderError(f"Missing parameter `{name}`")
        if params[name].shape != shape:
            raise exceptions.EmbedderError(f"Parameter `{name}` has shape {params[name].shape}, expected {shape}")


def _check_inputs(spec: EmbedderSpec, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise exceptions.EmbedderError(f"Expected inputs of shape (N, {spec.input_dim}), got {inputs.shape}")
    return inputs


def _activate(activation: constants.Activation, z: np.ndarray) -> np.ndarray:
    if activation == constants.Activation.RELU:
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(activation: constants.Activation, z: np.ndarray) -> np.ndarray:
    if activation == constants.Activation.RELU:
        return (z > 0).astype(np.float64)
    return 1.0 - np.tanh(z) ** 2


class _Cache(t.NamedTuple):
    layer_inputs: t.List[np.ndarray]
    pre_activations: t.List[np.ndarray]
    normalized: t.Optional[np.ndarray]
    std: t.Optional[np.ndarray]
    output: np.ndarray


def _forward(spec: EmbedderSpec, params: Params, inputs: np.ndarray) -> _Cache:
    layer_inputs, pre_activations = [], []
    h = inputs
    for layer in range(spec.num_layers):
        layer_inputs.append(h)
        z = h @ params[f"W{layer}"] + params[f"b{layer}"]
        pre_activations.append(z)
        h = _activate(spec.activation, z) if layer < spec.num_layers - 1 else z

    if not spec.layer_norm_output:
        return _Cache(layer_inputs, pre_activations, None, None, h)

    std = np.sqrt(np.var(h, axis=1, keepdims=True) + settings.LAYER_NORM_EPSILON)
    normalized = (h - np.mean(h, axis=1, keepdims=True)) / std
    return _Cache(layer_inputs, pre_activations, normalized, std, normalized * params["ln_gain"] + params["ln_bias"])


def forward(spec: EmbedderSpec, params: Params, inputs: np.ndarray) -> np.ndarray:
    """
    Embed a batch of inputs.

    :param spec: Architecture.
    :param params: Parameters matching ``spec``.
    :param inputs: ``(N, input_dim)`` matrix.
    :return: ``(N, embedding_dim)`` embeddings.
    :raises EmbedderError: On shape mismatch.
    """
    _check_params(spec, params)
    return _forward(spec, params, _check_inputs(spec, inputs)).output


def backward(spec: EmbedderSpec, params: Params, inputs: np.ndarray, d_embeddings: np.ndarray) -> Params:
    """
    Gradients of a scalar objective with respect to every parameter, given its gradient with respect to the
    embeddings of ``inputs``.

    :param spec: Architecture.
    :param params: Parameters the embeddings were computed with.
    :param inputs: ``(N, input_dim)`` matrix.
    :param d_embeddings: ``(N, embedding_dim)`` upstream gradient, e.g. ``LossGrad.d_embeddings``.
    :return: One gradient per parameter, keyed and shaped like ``params``.
    :raises EmbedderError: On shape mismatch.
    """
    _check_params(spec, params)
    inputs = _check_inputs(spec, inputs)
    d_embeddings = np.asarray(d_embeddings, dtype=np.float64)
    if d_embeddings.shape != (inputs.shape[0], spec.embedding_dim):
        raise exceptions.EmbedderError(
            f"Expected an upstream gradient of shape {(inputs.shape[0], spec.embedding_dim)}, got {d_embeddings.shape}"
        )

    cache = _forward(spec, params, inputs)
    grads: Params = {}
    dz = d_embeddings
    if spec.layer_norm_output:
        grads["ln_gain"] = np.sum(d_embeddings * cache.normalized, axis=0)
        grads["ln_bias"] = np.sum(d_embeddings, axis=0)
        d_normalized = d_embeddings * params["ln_gain"]
        dz = (
            d_normalized
            - np.mean(d_normalized, axis=1, keepdims=True)
            - cache.normalized * np.mean(d_normalized * cache.normalized, axis=1, keepdims=True)
        ) / cache.std

    for layer in reversed(range(spec.num_layers)):
        grads[f"W{layer}"] = cache.layer_inputs[layer].T @ dz
        grads[f"b{layer}"] = np.sum(dz, axis=0)
        if layer > 0:
            dz = (dz @ params[f"W{layer}"].T) * _activation_grad(spec.activation, cache.pre_activations[layer - 1])

    return {name: grads[name] for name in spec.parameter_shapes()}
