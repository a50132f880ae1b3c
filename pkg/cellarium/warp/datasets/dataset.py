from dataclasses import dataclass

import numpy as np

from cellarium.warp import constants, exceptions
from cellarium.warp.loss import LabeledBatch


@dataclass(frozen=True)
class Dataset:
    """
    Features and class labels of one split. Arrays are converted to ``float64`` features and ``int64`` labels.
    """

    features: np.ndarray
    labels: np.ndarray
    split: constants.DatasetSplit = constants.DatasetSplit.TRAIN

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise exceptions.DatasetFormatError(
                source="dataset", field="features", reason=f"expected an (N, D) matrix, got shape {features.shape}"
            )
        if labels.shape != (features.shape[0],):
            raise exceptions.DatasetFormatError(
                source="dataset", field="labels", reason=f"expected {features.shape[0]} labels, got {labels.shape}"
            )
        if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
            raise exceptions.DatasetFormatError(
                source="dataset", field="labels", reason="labels must be non-negative integers"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        object.__setattr__(self, "split", constants.DatasetSplit(self.split))

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        """Number of classes implied by the largest label."""
        return int(self.labels.max()) + 1 if len(self) else 0

    def head(self, limit: int) -> "Dataset":
        return Dataset(features=self.features[:limit], labels=self.labels[:limit], split=self.split)

    def with_embeddings(self, embeddings: np.ndarray) -> LabeledBatch:
        """Pair embeddings of the samples, in order, with their labels."""
        return LabeledBatch(embeddings=embeddings, labels=self.labels)
