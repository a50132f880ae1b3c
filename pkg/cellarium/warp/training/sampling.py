import typing as t

import numpy as np

from cellarium.warp import constants, exceptions
from cellarium.warp.seeding import stream_rng


class ClassBalancedSampler:
    """
    Endless stream of index batches, each made of ``batch_size / samples_per_class`` distinct classes with
    ``samples_per_class`` indices per class. Classes smaller than ``samples_per_class`` are sampled with replacement.

    :param labels: Class label of every sample.
    :param batch_size: Indices per batch.
    :param samples_per_class: Indices per class in a batch.
    :param seed: Run seed; batches come from its batch stream.
    """

    def __init__(self, labels: np.ndarray, batch_size: int, samples_per_class: int, seed: int):
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.size == 0:
            raise exceptions.SamplingError("Class-balanced sampling needs a non-empty 1-D label array")
        if samples_per_class < 1 or batch_size < 1:
            raise exceptions.SamplingError("`batch_size` and `samples_per_class` must be positive")
        if batch_size % samples_per_class != 0:
            raise exceptions.SamplingError(
                f"`batch_size` {batch_size} is not divisible by `samples_per_class` {samples_per_class}"
            )

        self.classes = np.unique(labels)
        self.classes_per_batch = batch_size // samples_per_class
        if self.classes_per_batch > self.classes.size:
            raise exceptions.SamplingError(
                f"A batch needs {self.classes_per_batch} distinct classes but the labels have {self.classes.size}"
            )
        self.samples_per_class = samples_per_class
        self.members = [np.flatnonzero(labels == c) for c in self.classes]
        self.rng = stream_rng(seed, constants.RandomStream.BATCHES)

    def __iter__(self) -> "ClassBalancedSampler":
        return self

    def __next__(self) -> np.ndarray:
        chosen = self.rng.choice(self.classes.size, size=self.classes_per_batch, replace=False)
        batch = []
        for position in chosen:
            members = self.members[position]
            replace = members.size < self.samples_per_class
            batch.append(self.rng.choice(members, size=self.samples_per_class, replace=replace))
        return np.concatenate(batch)

    @property
    def rng_state(self) -> t.Dict[str, t.Any]:
        """PCG64 state, enough to resume the stream exactly."""
        return self.rng.bit_generator.state

    @rng_state.setter
    def rng_state(self, state: t.Dict[str, t.Any]) -> None:
        self.rng.bit_generator.state = state


def class_balanced_batches(
    labels: np.ndarray, batch_size: int, samples_per_class: int, seed: int
) -> ClassBalancedSampler:
    """
    Stream of class-balanced index batches, deterministic given ``seed``.

    :raises SamplingError: If ``batch_size`` is not a multiple of ``samples_per_class`` or there are too few classes.
    """
    return ClassBalancedSampler(labels, batch_size, samples_per_class, seed)
