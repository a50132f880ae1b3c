"""
Seeded Gaussian blobs: one isotropic cluster per class around a randomly placed centre.
"""

import typing as t

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.datasets.dataset import Dataset
from cellarium.warp.logging import logger
from cellarium.warp.seeding import stream_rng

_SAMPLE_STREAMS = {
    constants.DatasetSplit.TRAIN: constants.RandomStream.BLOB_TRAIN_SAMPLES,
    constants.DatasetSplit.TEST: constants.RandomStream.BLOB_TEST_SAMPLES,
}


class BlobSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_classes: int = Field(ge=2, description="Number of classes (C)", examples=[10])
    per_class: int = Field(ge=1, description="Samples of every class in each split", examples=[100])
    dim: int = Field(ge=1, description="Feature dimension", examples=[2])
    center_scale: float = Field(gt=0, description="Standard deviation of the class centres", examples=[10.0])
    noise_std: float = Field(ge=0, description="Standard deviation of the samples around their centre", examples=[0.5])
    seed: int = Field(default=0, ge=0, description="Seed of the centres and the samples", examples=[0])


def _accepted_centers(spec: BlobSpec) -> t.Tuple[int, np.ndarray]:
    min_separation = settings.BLOB_MIN_SEPARATION_NOISE_MULTIPLE * spec.noise_std
    for attempt in range(settings.BLOB_MAX_REJECTIONS):
        seed = spec.seed + attempt
        rng = stream_rng(seed, constants.RandomStream.BLOB_CENTERS)
        centers = rng.normal(scale=spec.center_scale, size=(spec.num_classes, spec.dim))
        separation = pdist(centers).min()
        if separation > min_separation:
            return seed, centers
        logger.debug(f"Blob centres of seed {seed} are only {separation:.3g} apart, drawing again")
    raise exceptions.ConfigError(
        f"No blob centres separated by more than {min_separation:.3g} after {settings.BLOB_MAX_REJECTIONS} draws; "
        "increase `center_scale` or decrease `noise_std`"
    )


def make_blobs(spec: BlobSpec, split: constants.DatasetSplit = constants.DatasetSplit.TRAIN) -> Dataset:
    """
    Draw ``spec.per_class`` samples of every class around centres ``~ N(0, center_scale^2 I)``. Centres closer than
    ``settings.BLOB_MIN_SEPARATION_NOISE_MULTIPLE * noise_std`` are rejected and redrawn with the next seed. Both
    splits share the centres and draw their samples from separate streams, so a split never depends on the other.

    :param spec: Blob parameters.
    :param split: Which split to draw.
    :return: Samples ordered by class.
    """
    split = constants.DatasetSplit(split)
    seed, centers = _accepted_centers(spec)
    labels = np.repeat(np.arange(spec.num_classes), spec.per_class)
    noise = stream_rng(seed, _SAMPLE_STREAMS[split]).normal(scale=spec.noise_std, size=(labels.size, spec.dim))
    return Dataset(features=centers[labels] + noise, labels=labels, split=split)
