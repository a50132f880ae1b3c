"""
Warped softmax cross-entropy over Euclidean distances to per-class proxies, with analytic gradients.

For a sample ``e`` of class ``y`` the loss is ``log(1 + sum_{j != y} exp((f1(|e - p_y|) - f2(|e - p_j|)) / T))``.
Batches reduce by the arithmetic mean.
"""

import typing as t
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator
from scipy.special import logsumexp

from cellarium.warp import exceptions, settings
from cellarium.warp.geometry import PointLike, ProxyPair
from cellarium.warp.warping import WarpPair, coerce_warp_pair, warp_deriv, warp_value


class LossConfig(BaseModel):
    """
    Loss hyperparameters. ``warp`` may be given as an expression string, and is serialised back to one.
    """

    model_config = ConfigDict(frozen=True)

    warp: WarpPair = Field(description="Warp pair (f1, f2)", examples=["pwl(3,0.65,1.5,1.05) - t"])
    temperature: float = Field(default=1.0, gt=0, description="Divisor of the exponent argument", examples=[1.0])
    stability_shift: bool = Field(
        default=True, description="Evaluate the log-sum-exp with a max shift so it never overflows"
    )

    @field_validator("warp", mode="before")
    @classmethod
    def _parse_expression(cls, value: t.Any) -> t.Any:
        return coerce_warp_pair(value)

    @field_serializer("warp")
    def _serialize_warp(self, warp: WarpPair) -> str:
        return str(warp)


@dataclass(frozen=True)
class LabeledBatch:
    """
    Embeddings ``e_i`` (rows of an ``(N, D)`` matrix) with their integer class labels.
    """

    embeddings: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        labels = np.asarray(self.labels)
        if embeddings.ndim != 2:
            raise exceptions.LossInputError(f"Embeddings must form an (N, D) matrix, got shape {embeddings.shape}")
        if labels.ndim != 1 or labels.shape[0] != embeddings.shape[0]:
            raise exceptions.LossInputError(
                f"Expected {embeddings.shape[0]} labels, got an array of shape {labels.shape}"
            )
        if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
            raise exceptions.LossInputError("Labels must be non-negative integers")
        object.__setattr__(self, "embeddings", embeddings)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def subset(self, indices: np.ndarray) -> "LabeledBatch":
        return LabeledBatch(embeddings=self.embeddings[indices], labels=self.labels[indices])


@dataclass(frozen=True)
class ProxySet:
    """
    One learnable proxy per class, as rows of a ``(C, D)`` matrix.
    """

    proxies: np.ndarray

    def __post_init__(self):
        proxies = np.asarray(self.proxies, dtype=np.float64)
        if proxies.ndim != 2 or proxies.shape[0] < 2 or proxies.shape[1] < 1:
            raise exceptions.LossInputError(f"Need at least two proxies as a (C, D) matrix, got shape {proxies.shape}")
        object.__setattr__(self, "proxies", proxies)

    @property
    def num_classes(self) -> int:
        return self.proxies.shape[0]

    @property
    def dim(self) -> int:
        return self.proxies.shape[1]

    @classmethod
    def from_pair(cls, pair: ProxyPair) -> "ProxySet":
        return cls(proxies=np.stack([pair.p_c, pair.p_cprime]))


@dataclass(frozen=True)
class LossGrad:
    loss: float
    d_embeddings: np.ndarray
    d_proxies: np.ndarray

    @property
    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.loss) and np.all(np.isfinite(self.d_embeddings)) and np.all(np.isfinite(self.d_proxies))
        )


@dataclass
class _Terms:
    losses: np.ndarray
    weights: np.ndarray
    distances: np.ndarray
    differences: np.ndarray


def _check_inputs(batch: LabeledBatch, proxies: ProxySet) -> None:
    if len(batch) == 0:
        raise exceptions.LossInputError("The batch is empty")
    if batch.dim != proxies.dim:
        raise exceptions.LossInputError(f"Embedding dimension {batch.dim} does not match proxy dimension {proxies.dim}")
    if batch.labels.max() >= proxies.num_classes:
        raise exceptions.LossInputError(
            f"Label {batch.labels.max()} is out of range for {proxies.num_classes} proxies"
        )


def _loss_terms(batch: LabeledBatch, proxies: ProxySet, cfg: LossConfig) -> _Terms:
    _check_inputs(batch, proxies)
    rows = np.arange(len(batch))
    differences = batch.embeddings[:, np.newaxis, :] - proxies.proxies[np.newaxis, :, :]
    distances = np.linalg.norm(differences, axis=-1)

    positive = warp_value(cfg.warp.f1, distances[rows, batch.labels])
    negative = warp_value(cfg.warp.f2, distances)
    logits = (positive[:, np.newaxis] - negative) / cfg.temperature
    logits[rows, batch.labels] = -np.inf

    if cfg.stability_shift:
        # m = max(0, max_j z_j); rows with m = 0 go through log1p so that tiny losses keep full precision
        shifted = np.max(logits, axis=1) > 0
        losses = np.empty(len(batch), dtype=np.float64)
        losses[~shifted] = np.log1p(np.sum(np.exp(logits[~shifted]), axis=1))
        if shifted.any():
            augmented = np.concatenate([np.zeros((int(shifted.sum()), 1)), logits[shifted]], axis=1)
            losses[shifted] = logsumexp(augmented, axis=1)
    else:
        losses = np.log1p(np.sum(np.exp(logits), axis=1))

    # softmax weight of every negative class; the ground-truth column is exactly zero
    weights = np.exp(logits - losses[:, np.newaxis])
    return _Terms(losses=losses, weights=weights, distances=distances, differences=differences)


def per_sample_losses(batch: LabeledBatch, proxies: ProxySet, cfg: LossConfig) -> np.ndarray:
    """
    Loss of every sample of the batch.

    :return: Array of ``N`` losses, in batch order.
    """
    return _loss_terms(batch, proxies, cfg).losses


def batch_loss_grad(batch: LabeledBatch, proxies: ProxySet, cfg: LossConfig) -> LossGrad:
    """
    Mean loss over the batch together with its exact gradients with respect to every embedding and every proxy.
    Direction terms ``(e - p) / |e - p|`` at distances below ``settings.ZERO_DISTANCE_EPSILON`` contribute zero.

    :param batch: Embeddings and labels.
    :param proxies: One proxy per class.
    :param cfg: Loss configuration.
    :return: The loss and gradients shaped like ``batch.embeddings`` and ``proxies.proxies``.
    """
    terms = _loss_terms(batch, proxies, cfg)
    n = len(batch)
    rows = np.arange(n)
    labels = batch.labels

    directions = np.zeros_like(terms.differences)
    np.divide(
        terms.differences,
        terms.distances[..., np.newaxis],
        out=directions,
        where=terms.distances[..., np.newaxis] >= settings.ZERO_DISTANCE_EPSILON,
    )

    scale = 1.0 / (cfg.temperature * n)
    pull = terms.weights.sum(axis=1) * warp_deriv(cfg.warp.f1, terms.distances[rows, labels]) * scale
    push = terms.weights * warp_deriv(cfg.warp.f2, terms.distances) * scale

    positive_directions = directions[rows, labels]
    d_embeddings = pull[:, np.newaxis] * positive_directions - np.einsum("ic,icd->id", push, directions)

    d_proxies = np.einsum("ic,icd->cd", push, directions)
    np.add.at(d_proxies, labels, -pull[:, np.newaxis] * positive_directions)

    return LossGrad(loss=float(np.mean(terms.losses)), d_embeddings=d_embeddings, d_proxies=d_proxies)


def multiclass_loss(e: PointLike, y: int, proxies: ProxySet, cfg: LossConfig) -> float:
    """
    Loss of a single embedding ``e`` of class ``y`` against all proxies.
    """
    if not 0 <= int(y) < proxies.num_classes:
        raise exceptions.LossInputError(f"Class index {y} is out of range for {proxies.num_classes} proxies")
    batch = LabeledBatch(embeddings=np.asarray(e, dtype=np.float64)[np.newaxis, :], labels=np.array([int(y)]))
    return float(per_sample_losses(batch, proxies, cfg)[0])


def binary_loss(e: PointLike, pair: ProxyPair, cfg: LossConfig) -> float:
    """
    Two-class loss ``log(1 + exp((f1(|e - p_c|) - f2(|e - p_c'|)) / T))``; identical to :func:`multiclass_loss` with
    the pair as proxies 0 and 1 and ``y = 0``.
    """
    return multiclass_loss(e, 0, ProxySet.from_pair(pair), cfg)
