"""
Experiment drivers behind the ``cellarium-warp`` subcommands. Each driver validates its whole configuration, runs,
and only then writes its artifacts into the output directory: JSON with sorted keys and CSV floats with 17
significant digits, so that repeated runs with one seed produce identical files.
"""

import json
import math
import os
import pathlib
import typing as t
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from cellarium.warp import constants, exceptions, models, settings
from cellarium.warp.config import (
    AblationRunConfig,
    DatasetConfig,
    EvalOptions,
    EvalRunConfig,
    LandscapeRunConfig,
    SweepRunConfig,
    TrainRunConfig,
    VerifyRunConfig,
    load_config,
)
from cellarium.warp.datasets import Dataset, load_csv, load_idx, make_blobs
from cellarium.warp.landscape import evaluate_grid, export_grid, run_property_suite, summarize_extrema
from cellarium.warp.logging import logger, progress
from cellarium.warp.loss import ProxySet
from cellarium.warp.metrics import evaluate_retrieval
from cellarium.warp.training import (
    Checkpoint,
    EmbedderSpec,
    TrainConfig,
    TrainTrace,
    forward,
    load_checkpoint,
    save_checkpoint,
    train,
)
from cellarium.warp.training.embedder import Params
from cellarium.warp.warping import WarpPair, WarpSpec

PathLike = t.Union[str, os.PathLike]
ConfigT = t.TypeVar("ConfigT", bound=BaseModel)

RETRIEVAL_COLUMNS = ("nmi", "map_at_r", "rp", "p_at_1", "avg_dtp")
ABLATION_COLUMNS = ("expression", "r_at_1", "nmi", "avg_dtp", "diverged")


@dataclass
class TrainOutcome:
    trace: TrainTrace
    result: t.Optional[models.RetrievalResult]

    def metrics(self) -> t.Dict[str, t.Any]:
        """Flat metrics object of the test split plus the training status."""
        payload: t.Dict[str, t.Any] = self.result.to_flat_dict() if self.result is not None else {}
        payload.update(
            diverged=self.trace.diverged,
            steps=len(self.trace.steps),
            train_avg_dtp=self.trace.final_avg_dtp,
        )
        return payload


def with_seed(cfg: ConfigT, seed: t.Optional[int]) -> ConfigT:
    """
    Replace the ``seed`` of a run configuration, validating the new value.

    :raises ConfigError: If the seed is invalid.
    """
    if seed is None:
        return cfg
    try:
        return type(cfg).model_validate({**cfg.model_dump(), "seed": seed})
    except ValidationError as e:
        raise exceptions.ConfigError(f"--seed: {e.errors()[0]['msg']}") from e


def _output_dir(out_dir: PathLike) -> pathlib.Path:
    path = pathlib.Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not create output directory {path}: {e}") from e
    return path


def write_json(path: PathLike, payload: t.Any) -> None:
    """
    :raises ArtifactIOError: If the file cannot be written.
    """
    try:
        with open(path, "w") as f:
            f.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write {path}: {e}") from e


def write_frame(path: PathLike, frame: pd.DataFrame) -> None:
    """
    :raises ArtifactIOError: If the file cannot be written.
    """
    try:
        frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write {path}: {e}") from e


def load_dataset(cfg: DatasetConfig, split: constants.DatasetSplit, seed: int) -> Dataset:
    """
    Load one split of a configured dataset. Blob datasets are drawn from ``seed``.
    """
    split = constants.DatasetSplit(split)
    train_split = split == constants.DatasetSplit.TRAIN
    if cfg.source == constants.DatasetSource.BLOBS:
        return make_blobs(cfg.blobs.model_copy(update={"seed": seed}), split)
    if cfg.source == constants.DatasetSource.CSV:
        return load_csv(cfg.train_csv if train_split else cfg.test_csv, split)
    images, labels = (cfg.train_images, cfg.train_labels) if train_split else (cfg.test_images, cfg.test_labels)
    return load_idx(images, labels, cfg.limit, split)


def evaluate_embedder(
    embedder: EmbedderSpec,
    params: Params,
    proxies: ProxySet,
    dataset: Dataset,
    options: EvalOptions,
    seed: int,
) -> t.Optional[models.RetrievalResult]:
    """
    Retrieval metrics and AvgDTP of a dataset embedded by a trained model.

    :return: The metrics, or None when the model produces non-finite embeddings.
    """
    embeddings = forward(embedder, params, dataset.features)
    if not np.all(np.isfinite(embeddings)):
        logger.warning("The model produces non-finite embeddings, metrics are not available")
        return None
    kmeans_seed = options.kmeans_seed if options.kmeans_seed is not None else seed
    return evaluate_retrieval(dataset.with_embeddings(embeddings), options.ks, kmeans_seed, proxies)


def _load_splits(cfg: DatasetConfig, seed: int) -> t.Tuple[Dataset, Dataset]:
    return load_dataset(cfg, constants.DatasetSplit.TRAIN, seed), load_dataset(cfg, constants.DatasetSplit.TEST, seed)


def run_training(cfg: TrainRunConfig, train_set: Dataset, test_set: Dataset) -> TrainOutcome:
    """
    Train on ``train_set`` with the run seed and evaluate on ``test_set``.
    """
    training = cfg.training.model_copy(update={"seed": cfg.seed})
    trace = train(train_set.features, train_set.labels, cfg.embedder, training)
    result = evaluate_embedder(cfg.embedder, trace.params, trace.proxies, test_set, cfg.evaluation, cfg.seed)
    return TrainOutcome(trace=trace, result=result)


def _metric_columns(ks: t.Sequence[int], num_samples: int) -> t.List[str]:
    return [f"r_at_{k}" for k in sorted(set(k for k in ks if k < num_samples))] + list(RETRIEVAL_COLUMNS)


def cmd_landscape(config_path: PathLike, out_dir: PathLike, seed: t.Optional[int] = None) -> models.ExtremaReport:
    """
    Evaluate a binary loss landscape and write ``grid.csv`` and ``extrema.json``.

    :param config_path: :class:`~cellarium.warp.config.LandscapeRunConfig` file.
    :param out_dir: Output directory, created if missing.
    :param seed: Overrides the configured seed.
    :return: The extrema report.
    """
    cfg = with_seed(load_config(config_path, LandscapeRunConfig), seed)
    pair = cfg.proxies.to_pair()
    grid = evaluate_grid(pair, cfg.loss, cfg.grid)
    report = summarize_extrema(grid, pair, cfg.loss)
    logger.info(
        f"{len(report.minima)} minima and {len(report.maxima)} maxima, outbound argmin at t = "
        f"{report.outbound_argmin_t:.4g}"
    )

    out = _output_dir(out_dir)
    export_grid(grid, out / settings.GRID_FILE)
    write_json(out / settings.EXTREMA_FILE, report.model_dump(mode="json"))
    return report


def cmd_verify(
    out_dir: PathLike,
    config_path: t.Optional[PathLike] = None,
    seed: t.Optional[int] = None,
    resolution: t.Optional[int] = None,
) -> models.PropertySuiteReport:
    """
    Run the landscape and loss property suite and write ``verify.json``.

    :param out_dir: Output directory, created if missing.
    :param config_path: Optional :class:`~cellarium.warp.config.VerifyRunConfig` file.
    :param seed: Overrides the configured seed.
    :param resolution: Overrides the configured grid resolution.
    :return: The suite report; the caller decides the exit status from ``report.passed``.
    """
    cfg = load_config(config_path, VerifyRunConfig) if config_path is not None else VerifyRunConfig()
    cfg = with_seed(cfg, seed)
    if resolution is not None:
        try:
            cfg = VerifyRunConfig(seed=cfg.seed, resolution=resolution)
        except ValidationError as e:
            raise exceptions.ConfigError(f"--resolution: {e.errors()[0]['msg']}") from e

    report = run_property_suite(seed=cfg.seed, resolution=cfg.resolution)
    for result in report.properties:
        logger.info(f"{result.name}: {result.verdict.value}{' (witness)' if result.expected_failure else ''}")

    write_json(_output_dir(out_dir) / settings.VERIFY_FILE, report.model_dump(mode="json"))
    return report


def cmd_train(config_path: PathLike, out_dir: PathLike, seed: t.Optional[int] = None) -> TrainOutcome:
    """
    Train an embedder and its proxies, evaluate it on the test split, and write ``checkpoint.h5``, ``trace.csv`` and
    ``metrics.json``. A diverged run still writes its artifacts, truncated at the last finite result.

    :param config_path: :class:`~cellarium.warp.config.TrainRunConfig` file.
    :param out_dir: Output directory, created if missing.
    :param seed: Overrides the configured seed.
    """
    cfg = with_seed(load_config(config_path, TrainRunConfig), seed)
    train_set, test_set = _load_splits(cfg.dataset, cfg.seed)
    outcome = run_training(cfg, train_set, test_set)

    out = _output_dir(out_dir)
    save_checkpoint(out / settings.CHECKPOINT_FILE, Checkpoint.from_trace(outcome.trace))
    write_frame(out / settings.TRACE_FILE, outcome.trace.to_frame())
    write_json(out / settings.METRICS_FILE, outcome.metrics())
    return outcome


def cmd_eval(config_path: PathLike, out_dir: PathLike, seed: t.Optional[int] = None) -> models.RetrievalResult:
    """
    Evaluate a checkpoint on the test split of a dataset and write ``metrics.json``.

    :param config_path: :class:`~cellarium.warp.config.EvalRunConfig` file.
    :param out_dir: Output directory, created if missing.
    :param seed: Overrides the configured seed.
    :raises MetricError: If the checkpointed model produces non-finite embeddings.
    """
    cfg = with_seed(load_config(config_path, EvalRunConfig), seed)
    checkpoint = load_checkpoint(cfg.checkpoint)
    test_set = load_dataset(cfg.dataset, constants.DatasetSplit.TEST, cfg.seed)
    result = evaluate_embedder(
        checkpoint.embedder, checkpoint.params, checkpoint.proxies, test_set, cfg.evaluation, cfg.seed
    )
    if result is None:
        raise exceptions.MetricError(f"{cfg.checkpoint} produces non-finite embeddings")

    payload = {**result.to_flat_dict(), "diverged": checkpoint.diverged, "steps": checkpoint.step}
    write_json(_output_dir(out_dir) / settings.METRICS_FILE, payload)
    return result


def sweep_warp(warp: WarpPair, parameter: constants.SweepParameter, value: float) -> WarpPair:
    """
    Change one parameter of a piecewise-linear ``f1``, keeping the offset at the same multiple of ``(1 - k1) alpha``.
    ``alpha = 0`` replaces ``f1`` by ``k2 * t``, which pulls inward everywhere. Other warps are returned unchanged.

    :raises WarpSpecError: If the value makes the warp invalid.
    """
    f1 = warp.f1
    if f1.variant != constants.WarpVariant.PIECEWISE_LINEAR:
        return warp
    delta_k = f1.delta / ((1.0 - f1.k1) * f1.alpha)
    parameter = constants.SweepParameter(parameter)
    if parameter == constants.SweepParameter.ALPHA:
        if value == 0:
            swept = WarpSpec.scale(f1.k2)
        else:
            swept = WarpSpec.piecewise_linear(value, f1.k1, f1.k2, delta=delta_k * (1.0 - f1.k1) * value)
    elif parameter == constants.SweepParameter.K1:
        swept = WarpSpec.piecewise_linear(f1.alpha, value, f1.k2, delta=delta_k * (1.0 - value) * f1.alpha)
    elif parameter == constants.SweepParameter.K2:
        swept = WarpSpec.piecewise_linear(f1.alpha, f1.k1, value, delta=f1.delta)
    else:
        swept = WarpSpec.piecewise_linear(f1.alpha, f1.k1, f1.k2, delta=value * (1.0 - f1.k1) * f1.alpha)
    return WarpPair(f1=swept, f2=warp.f2)


def with_warps(training: TrainConfig, transform: t.Callable[[WarpPair], WarpPair]) -> TrainConfig:
    """Apply ``transform`` to the warp pair of both phases."""
    phases = {}
    for name in ("phase1", "phase2"):
        phase = getattr(training, name)
        loss = phase.loss.model_copy(update={"warp": transform(phase.loss.warp)})
        phases[name] = phase.model_copy(update={"loss": loss})
    return training.model_copy(update=phases)


def cmd_sweep(config_path: PathLike, out_dir: PathLike, seed: t.Optional[int] = None) -> pd.DataFrame:
    """
    Train and evaluate once per swept value, all with the same seed, and write ``sweep.csv`` with one row per value
    in input order.

    :param config_path: :class:`~cellarium.warp.config.SweepRunConfig` file.
    :param out_dir: Output directory, created if missing.
    :param seed: Overrides the configured seed.
    :raises ConfigError: If no phase has a piecewise-linear ``f1`` or a value makes a warp invalid.
    """
    cfg = with_seed(load_config(config_path, SweepRunConfig), seed)
    parameter = cfg.sweep.parameter
    if all(getattr(cfg.training, name).alpha is None for name in ("phase1", "phase2")):
        raise exceptions.ConfigError("sweep: no phase uses a piecewise-linear f1")
    try:
        runs = []
        for value in cfg.sweep.values:
            training = with_warps(cfg.training, lambda warp: sweep_warp(warp, parameter, value))
            runs.append((value, cfg.model_copy(update={"training": training})))
    except exceptions.WarpSpecError as e:
        raise exceptions.ConfigError(f"sweep.values: {e}") from e

    train_set, test_set = _load_splits(cfg.dataset, cfg.seed)
    rows = []
    for value, run in progress(runs, desc=f"Sweeping {parameter.value}"):
        outcome = run_training(run, train_set, test_set)
        rows.append({"parameter": parameter.value, "value": value, **outcome.metrics()})
        logger.info(f"{parameter.value} = {value}: {outcome.metrics()}")

    columns = ["parameter", "value", *_metric_columns(cfg.evaluation.ks, len(test_set)), "train_avg_dtp", "diverged"]
    frame = pd.DataFrame(rows, columns=columns)
    write_frame(_output_dir(out_dir) / settings.SWEEP_FILE, frame)
    return frame


def cmd_ablation(config_path: PathLike, out_dir: PathLike, seed: t.Optional[int] = None) -> pd.DataFrame:
    """
    Compare warp pairs: train and evaluate once per expression, used for both phases, and write ``ablation.csv``.
    Diverged runs report the metrics of their last finite state.

    :param config_path: :class:`~cellarium.warp.config.AblationRunConfig` file.
    :param out_dir: Output directory, created if missing.
    :param seed: Overrides the configured seed.
    """
    cfg = with_seed(load_config(config_path, AblationRunConfig), seed)
    train_set, test_set = _load_splits(cfg.dataset, cfg.seed)

    rows = []
    for warp in progress(cfg.expressions, desc="Ablation"):
        run = cfg.model_copy(update={"training": with_warps(cfg.training, lambda _: warp)})
        metrics = run_training(run, train_set, test_set).metrics()
        rows.append({"expression": str(warp), **{k: metrics.get(k, math.nan) for k in ABLATION_COLUMNS[1:]}})
        logger.info(f"{warp}: {rows[-1]}")

    frame = pd.DataFrame(rows, columns=list(ABLATION_COLUMNS))
    write_frame(_output_dir(out_dir) / settings.ABLATION_FILE, frame)
    return frame
