from enum import Enum, IntEnum


class WarpVariant(Enum):
    """
    Members of the warp-function family.

    """

    IDENTITY: str = "identity"
    POWER: str = "power"
    SCALE: str = "scale"
    PIECEWISE_LINEAR: str = "piecewise_linear"


class Activation(Enum):
    """
    Hidden-layer activations supported by the feed-forward embedder.

    """

    RELU: str = "relu"
    TANH: str = "tanh"


class DatasetSource(Enum):
    """
    Where an experiment obtains its features and labels.

    """

    BLOBS: str = "blobs"
    CSV: str = "csv"
    IDX: str = "idx"


class DatasetSplit(Enum):
    TRAIN: str = "train"
    TEST: str = "test"


class SweepParameter(Enum):
    """
    Warp parameters that ``cellarium-warp sweep`` can vary.

    """

    ALPHA: str = "alpha"
    K1: str = "k1"
    K2: str = "k2"
    DELTA_K: str = "delta_k"


class RandomStream(IntEnum):
    """
    Spawn keys of the random streams derived from a run seed. The values are part of the reproducibility
    contract: changing them changes every trace.

    """

    PROXIES = 0
    MODEL = 1
    BATCHES = 2
    BLOB_CENTERS = 3
    BLOB_TRAIN_SAMPLES = 4
    BLOB_TEST_SAMPLES = 5
    KMEANS = 6
    VERIFICATION = 7


class ExitCode(IntEnum):
    OK = 0
    PROPERTY_FAILURE = 1
    CONFIG_ERROR = 2
    IO_ERROR = 3


class Verdict(Enum):
    PASS: str = "pass"
    FAIL: str = "fail"


class ExtremumKind(Enum):
    MINIMUM: str = "minimum"
    MAXIMUM: str = "maximum"


class ExtremumSource(Enum):
    """
    Where an extremum was detected: on the dense 2-D grid, or on a circle around the opposite-class proxy.

    """

    GRID: str = "grid"
    DISK: str = "disk"
