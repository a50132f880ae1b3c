import typing as t
from dataclasses import dataclass


class WarpBaseError(Exception):
    """Base class for all cellarium-warp exceptions"""


class GeometryError(WarpBaseError):
    pass


class WarpSpecError(WarpBaseError):
    pass


@dataclass
class WarpExpressionError(WarpBaseError):
    expression: str
    position: int
    reason: str

    def __str__(self) -> str:
        pointer = " " * self.position + "^"
        return f"{self.reason} at position {self.position}\n  {self.expression}\n  {pointer}"


class LossInputError(WarpBaseError):
    pass


class LandscapeError(WarpBaseError):
    pass


class MetricError(WarpBaseError):
    pass


@dataclass
class DatasetFormatError(WarpBaseError):
    source: str
    field: str
    reason: str
    line: t.Optional[int] = None

    def __str__(self) -> str:
        location = f"{self.source}:{self.line}" if self.line is not None else self.source
        return f"{location}: invalid `{self.field}`: {self.reason}"


class DivergenceError(WarpBaseError):
    pass


class CheckpointError(WarpBaseError):
    pass


class ConfigError(WarpBaseError):
    pass


class ArtifactIOError(WarpBaseError):
    pass


class EmbedderError(WarpBaseError):
    pass


class SamplingError(WarpBaseError):
    pass
