"""
Central finite-difference oracle for the analytic loss gradients.
"""

import typing as t
from dataclasses import dataclass

import numpy as np

from cellarium.warp import constants, settings
from cellarium.warp.loss import LabeledBatch, LossConfig, ProxySet, batch_loss_grad


@dataclass(frozen=True)
class GradCheckResult:
    """
    Largest componentwise relative error between analytic and numerical gradients.
    """

    embeddings_error: float
    proxies_error: float

    @property
    def max_error(self) -> float:
        return max(self.embeddings_error, self.proxies_error)


def relative_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = settings.GRADCHECK_DENOMINATOR_FLOOR
) -> float:
    """
    Maximum of ``|a - n| / max(|a|, |n|, floor)`` over all components. Components below ``floor`` in magnitude are
    thus held to an absolute error of ``floor`` times the accepted ratio, since finite-difference round-off swamps
    their relative error.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denominator))


def numerical_gradient(
    f: t.Callable[[np.ndarray], float], x: np.ndarray, h: float = settings.GRADCHECK_STEP
) -> np.ndarray:
    """
    Central differences of a scalar function with respect to every entry of ``x``. ``x`` is restored afterwards.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + h
        upper = f(x)
        x[index] = original - h
        lower = f(x)
        x[index] = original
        grad[index] = (upper - lower) / (2.0 * h)
    return grad


def is_near_kink(
    batch: LabeledBatch, proxies: ProxySet, cfg: LossConfig, margin: float = settings.GRADCHECK_KINK_MARGIN
) -> bool:
    """
    Whether any embedding-proxy distance lies within ``margin`` of zero or of a piecewise-linear switch point, where
    the loss is not differentiable and finite differences are meaningless.
    """
    distances = np.linalg.norm(batch.embeddings[:, np.newaxis, :] - proxies.proxies[np.newaxis, :, :], axis=-1)
    if np.any(distances < margin):
        return True
    for spec in (cfg.warp.f1, cfg.warp.f2):
        if spec.variant == constants.WarpVariant.PIECEWISE_LINEAR and np.any(np.abs(distances - spec.alpha) < margin):
            return True
    return False


def finite_difference_check(
    batch: LabeledBatch, proxies: ProxySet, cfg: LossConfig, h: float = settings.GRADCHECK_STEP
) -> GradCheckResult:
    """
    Compare :func:`~cellarium.warp.loss.batch_loss_grad` against central differences of the batch loss.

    :param batch: Embeddings and labels.
    :param proxies: One proxy per class.
    :param cfg: Loss configuration.
    :param h: Finite-difference step.
    :return: The largest relative errors for the embedding and the proxy gradients.
    """
    analytic = batch_loss_grad(batch, proxies, cfg)
    embeddings = batch.embeddings.copy()
    proxy_matrix = proxies.proxies.copy()

    def loss_of_embeddings(x: np.ndarray) -> float:
        return batch_loss_grad(LabeledBatch(embeddings=x, labels=batch.labels), proxies, cfg).loss

    def loss_of_proxies(x: np.ndarray) -> float:
        return batch_loss_grad(batch, ProxySet(proxies=x), cfg).loss

    return GradCheckResult(
        embeddings_error=relative_error(analytic.d_embeddings, numerical_gradient(loss_of_embeddings, embeddings, h)),
        proxies_error=relative_error(analytic.d_proxies, numerical_gradient(loss_of_proxies, proxy_matrix, h)),
    )
