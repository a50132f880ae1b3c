"""
JSON run configurations of the ``cellarium-warp`` subcommands. Every file is validated completely before any
computation starts.
"""

import os
import typing as t

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.datasets import BlobSpec
from cellarium.warp.geometry import ProxyPair
from cellarium.warp.landscape import GridSpec
from cellarium.warp.loss import LossConfig
from cellarium.warp.training import EmbedderSpec, TrainConfig
from cellarium.warp.warping import WarpPair, coerce_warp_pair

ConfigT = t.TypeVar("ConfigT", bound=BaseModel)


class _Config(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ProxyPairConfig(_Config):
    p_c: t.List[float] = Field(min_length=1, description="Ground-truth proxy", examples=[[0.0, 0.0]])
    p_cprime: t.List[float] = Field(min_length=1, description="Opposite-class proxy", examples=[[4.0, 0.0]])

    @model_validator(mode="after")
    def _check_pair(self) -> "ProxyPairConfig":
        if len(self.p_c) != len(self.p_cprime):
            raise ValueError(f"proxies have different dimensions {len(self.p_c)} and {len(self.p_cprime)}")
        if self.p_c == self.p_cprime:
            raise ValueError("proxies must not coincide")
        return self

    def to_pair(self) -> ProxyPair:
        return ProxyPair(p_c=self.p_c, p_cprime=self.p_cprime)


class LandscapeRunConfig(_Config):
    seed: int = Field(default=0, ge=0, description="Run seed; the landscape itself is deterministic")
    proxies: ProxyPairConfig = Field(description="The binary proxy pair")
    loss: LossConfig = Field(description="Warp pair and temperature")
    grid: GridSpec = Field(description="Evaluated lattice")


class VerifyRunConfig(_Config):
    seed: int = Field(default=0, ge=0, description="Seed of the random property cases")
    resolution: int = Field(
        default=512,
        ge=settings.GRID_MIN_RESOLUTION,
        le=settings.GRID_MAX_RESOLUTION,
        description="Grid resolution of the landscape properties",
    )


class DatasetConfig(_Config):
    """
    Where features and labels come from. Blob datasets draw both splits from the run seed; file datasets name one
    file (CSV) or file pair (IDX) per split.
    """

    source: constants.DatasetSource = Field(description="Dataset kind", examples=["blobs"])
    blobs: t.Optional[BlobSpec] = Field(default=None, description="Blob parameters; `seed` is set from the run seed")
    train_csv: t.Optional[str] = Field(default=None, description="Training split as CSV")
    test_csv: t.Optional[str] = Field(default=None, description="Test split as CSV")
    train_images: t.Optional[str] = Field(default=None, description="Training images as IDX")
    train_labels: t.Optional[str] = Field(default=None, description="Training labels as IDX")
    test_images: t.Optional[str] = Field(default=None, description="Test images as IDX")
    test_labels: t.Optional[str] = Field(default=None, description="Test labels as IDX")
    limit: t.Optional[int] = Field(default=None, ge=1, description="Keep the first samples of each IDX split")

    @model_validator(mode="after")
    def _check_source(self) -> "DatasetConfig":
        required = {
            constants.DatasetSource.BLOBS: ("blobs",),
            constants.DatasetSource.CSV: ("train_csv", "test_csv"),
            constants.DatasetSource.IDX: ("train_images", "train_labels", "test_images", "test_labels"),
        }[self.source]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"a {self.source.value} dataset needs {', '.join(missing)}")
        return self


class EvalOptions(_Config):
    ks: t.List[int] = Field(
        default=list(settings.DEFAULT_RECALL_KS), min_length=1, description="Recall@K sizes", examples=[[1, 2, 4, 8]]
    )
    kmeans_seed: t.Optional[int] = Field(
        default=None, ge=0, description="Seed of the NMI clustering; run seed if unset"
    )

    @field_validator("ks")
    @classmethod
    def _check_ks(cls, ks: t.List[int]) -> t.List[int]:
        if any(k < 1 for k in ks):
            raise ValueError(f"Recall sizes must be positive, got {ks}")
        return ks


class TrainRunConfig(_Config):
    seed: int = Field(default=0, ge=0, description="Seed of every random stream of the run", examples=[0])
    dataset: DatasetConfig = Field(description="Training and test data")
    embedder: EmbedderSpec = Field(description="Embedder architecture")
    training: TrainConfig = Field(description="Optimisation schedule; `seed` is set from the run seed")
    evaluation: EvalOptions = Field(default_factory=EvalOptions, description="Test-split metrics")


class EvalRunConfig(_Config):
    seed: int = Field(default=0, ge=0, description="Seed of the blob data and the NMI clustering")
    checkpoint: str = Field(description="Checkpoint written by `cellarium-warp train`")
    dataset: DatasetConfig = Field(description="Data whose test split is evaluated")
    evaluation: EvalOptions = Field(default_factory=EvalOptions, description="Metric options")


class SweepSpec(_Config):
    parameter: constants.SweepParameter = Field(description="Swept warp parameter", examples=["alpha"])
    values: t.List[float] = Field(min_length=1, description="Values in run order", examples=[[0.0, 1.0, 3.0]])


class SweepRunConfig(TrainRunConfig):
    sweep: SweepSpec = Field(description="Parameter and values; every value is one training run")


class AblationRunConfig(TrainRunConfig):
    expressions: t.List[WarpPair] = Field(
        min_length=1, description="Warp pairs used for both phases, one run each", examples=[["t - t", "0.5*t - t"]]
    )

    @field_validator("expressions", mode="before")
    @classmethod
    def _parse_expressions(cls, values: t.Any) -> t.Any:
        if isinstance(values, list):
            return [coerce_warp_pair(value) for value in values]
        return values


def _describe(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return "; ".join(lines)


def parse_config(text: str, model: t.Type[ConfigT], source: str = "<config>") -> ConfigT:
    """
    Validate a JSON document against a run configuration model.

    :raises ConfigError: Naming the path of every offending field.
    """
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        raise exceptions.ConfigError(f"{source}: {_describe(e)}") from e


def load_config(path: t.Union[str, os.PathLike], model: t.Type[ConfigT]) -> ConfigT:
    """
    Read and validate a JSON run configuration.

    :param path: Configuration file.
    :param model: One of the ``*RunConfig`` models.
    :raises ArtifactIOError: If the file cannot be read.
    :raises ConfigError: If the document is not a valid configuration.
    """
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not read configuration {path}: {e}") from e
    return parse_config(text, model, source=os.fspath(path))
