import numpy as np

from cellarium.warp import constants


def stream_rng(seed: int, stream: constants.RandomStream) -> np.random.Generator:
    """
    Independent PCG64 generator for one purpose of a run. Streams of the same seed never overlap and a stream does
    not depend on how much the other streams were consumed.

    :param seed: Run seed.
    :param stream: Purpose of the stream; its value is the spawn key.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))
