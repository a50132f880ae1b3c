"""
Two-phase training of an embedder and its class proxies with the warped loss.
"""

import math
import typing as t
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.logging import logger, progress
from cellarium.warp.loss import LabeledBatch, LossConfig, ProxySet, batch_loss_grad
from cellarium.warp.metrics import avg_dtp
from cellarium.warp.seeding import stream_rng
from cellarium.warp.training.embedder import EmbedderSpec, Params, backward, forward, init_params
from cellarium.warp.training.optimizer import Adam
from cellarium.warp.training.sampling import ClassBalancedSampler, class_balanced_batches

TRACE_COLUMNS = ("step", "phase", "alpha", "loss", "epoch", "avg_dtp")


class PhaseConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: int = Field(ge=0, description="Optimisation steps of the phase", examples=[300])
    loss: LossConfig = Field(description="Loss used during the phase")
    lr_multiplier: float = Field(
        default=1.0, gt=0, description="Factor applied to both learning rates during the phase", examples=[0.5]
    )

    @property
    def alpha(self) -> t.Optional[float]:
        """Point of attraction of ``f1``, if it is piecewise-linear."""
        f1 = self.loss.warp.f1
        return f1.alpha if f1.variant == constants.WarpVariant.PIECEWISE_LINEAR else None


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0, description="Seed of every random stream of the run", examples=[0])
    batch_size: int = Field(ge=1, description="Samples per batch", examples=[32])
    samples_per_class: int = Field(ge=1, description="Samples of each class in a batch", examples=[4])
    lr_model: float = Field(gt=0, description="Adam learning rate of the embedder", examples=[0.01])
    lr_proxies: float = Field(gt=0, description="Adam learning rate of the proxies", examples=[0.01])
    betas: t.Tuple[float, float] = Field(default=settings.ADAM_BETAS, description="Adam moment decay rates")
    eps: float = Field(default=settings.ADAM_EPSILON, gt=0, description="Adam denominator guard")
    phase1: PhaseConfig = Field(description="First phase, typically with a larger alpha")
    phase2: PhaseConfig = Field(description="Second phase, typically with a lower alpha and smaller learning rates")
    steps_per_epoch: t.Optional[int] = Field(
        default=None, ge=1, description="Steps between AvgDTP measurements; defaults to ceil(N / batch_size)"
    )
    divergence_dtp_factor: float = Field(
        default=settings.DIVERGENCE_DTP_FACTOR,
        gt=1,
        description="Training stops as diverged once AvgDTP exceeds this multiple of its initial value",
    )

    @model_validator(mode="after")
    def _check_batching(self) -> "TrainConfig":
        if self.batch_size % self.samples_per_class != 0:
            raise ValueError(
                f"`batch_size` {self.batch_size} must be a multiple of `samples_per_class` {self.samples_per_class}"
            )
        if not all(0 <= beta < 1 for beta in self.betas):
            raise ValueError(f"Adam betas must lie in [0, 1), got {self.betas}")
        return self


@dataclass(frozen=True)
class StepRecord:
    step: int
    phase: int
    alpha: t.Optional[float]
    loss: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    step: int
    avg_dtp: float


@dataclass
class TrainTrace:
    """
    Everything a training run produced. When ``diverged`` is set, the records, parameters and optimizer states are
    those of the last step with finite results.
    """

    seed: int
    embedder: EmbedderSpec
    params: Params
    proxies: ProxySet
    initial_avg_dtp: float
    steps: t.List[StepRecord] = field(default_factory=list)
    epochs: t.List[EpochRecord] = field(default_factory=list)
    diverged: bool = False
    model_optimizer: t.Dict[str, t.Any] = field(default_factory=dict)
    proxy_optimizer: t.Dict[str, t.Any] = field(default_factory=dict)
    sampler_state: t.Dict[str, t.Any] = field(default_factory=dict)

    @property
    def final_avg_dtp(self) -> float:
        return self.epochs[-1].avg_dtp if self.epochs else self.initial_avg_dtp

    def to_frame(self) -> pd.DataFrame:
        """
        One row per step with ``epoch`` and ``avg_dtp`` filled on the steps that close an epoch.
        """
        frame = pd.DataFrame(
            {
                "step": [r.step for r in self.steps],
                "phase": [r.phase for r in self.steps],
                "alpha": [np.nan if r.alpha is None else r.alpha for r in self.steps],
                "loss": [r.loss for r in self.steps],
            },
            columns=TRACE_COLUMNS[:4],
        )
        epochs = pd.DataFrame(
            {"step": [r.step for r in self.epochs], "epoch": [r.epoch for r in self.epochs]}, dtype="Int64"
        ).assign(avg_dtp=[r.avg_dtp for r in self.epochs])
        frame = frame.astype({"step": "Int64", "phase": "Int64"}).merge(epochs, on="step", how="left")
        return frame[list(TRACE_COLUMNS)]


def init_proxies(num_classes: int, dim: int, seed: int) -> ProxySet:
    """
    Independent standard-normal proxies drawn from the proxy stream of ``seed`` (PCG64 bits, ziggurat normals).
    """
    if num_classes < 2 or dim < 1:
        raise exceptions.LossInputError(f"Need at least two proxies of dimension >= 1, got ({num_classes}, {dim})")
    rng = stream_rng(seed, constants.RandomStream.PROXIES)
    return ProxySet(proxies=rng.standard_normal(size=(num_classes, dim)))


def _measure_dtp(spec: EmbedderSpec, params: Params, data: np.ndarray, labels: np.ndarray, proxies: ProxySet) -> float:
    embeddings = forward(spec, params, data)
    if not np.all(np.isfinite(embeddings)):
        return math.inf
    return avg_dtp(LabeledBatch(embeddings=embeddings, labels=labels), proxies).avg_dtp


class _Run:
    def __init__(self, data: np.ndarray, labels: np.ndarray, spec: EmbedderSpec, cfg: TrainConfig):
        self.data, self.labels, self.spec, self.cfg = data, labels, spec, cfg
        self.params = init_params(spec, cfg.seed)
        self.proxies = init_proxies(int(labels.max()) + 1, spec.embedding_dim, cfg.seed)
        self.model_optimizer = Adam(self.params, cfg.lr_model, cfg.betas, cfg.eps)
        self.proxy_optimizer = Adam({"proxies": self.proxies.proxies}, cfg.lr_proxies, cfg.betas, cfg.eps)
        self.sampler: ClassBalancedSampler = class_balanced_batches(
            labels, cfg.batch_size, cfg.samples_per_class, cfg.seed
        )
        self.steps_per_epoch = cfg.steps_per_epoch or math.ceil(len(labels) / cfg.batch_size)
        self.trace = TrainTrace(
            seed=cfg.seed,
            embedder=spec,
            params=self.params,
            proxies=self.proxies,
            initial_avg_dtp=_measure_dtp(spec, self.params, data, labels, self.proxies),
        )

    def step(self, phase_index: int, phase: PhaseConfig) -> bool:
        """Run one optimisation step; False when it did not produce finite results."""
        indices = next(self.sampler)
        inputs = self.data[indices]
        embeddings = forward(self.spec, self.params, inputs)
        if not np.all(np.isfinite(embeddings)):
            return False
        batch = LabeledBatch(embeddings=embeddings, labels=self.labels[indices])
        grad = batch_loss_grad(batch, self.proxies, phase.loss)
        if not grad.is_finite:
            return False

        model_state, proxy_state = self.model_optimizer.state_dict(), self.proxy_optimizer.state_dict()
        try:
            params = self.model_optimizer.step(self.params, backward(self.spec, self.params, inputs, grad.d_embeddings))
            proxies = self.proxy_optimizer.step({"proxies": self.proxies.proxies}, {"proxies": grad.d_proxies})
        except exceptions.DivergenceError as e:
            logger.debug(f"Optimizer rejected the step: {e}")
            self.model_optimizer.load_state_dict(model_state)
            self.proxy_optimizer.load_state_dict(proxy_state)
            return False
        if not all(np.all(np.isfinite(v)) for v in [*params.values(), proxies["proxies"]]):
            self.model_optimizer.load_state_dict(model_state)
            self.proxy_optimizer.load_state_dict(proxy_state)
            return False

        self.params, self.proxies = params, ProxySet(proxies=proxies["proxies"])
        self.trace.steps.append(
            StepRecord(step=len(self.trace.steps) + 1, phase=phase_index, alpha=phase.alpha, loss=grad.loss)
        )
        return True

    def end_of_epoch(self) -> bool:
        """Record AvgDTP; False when it is non-finite or beyond the divergence threshold."""
        dtp = _measure_dtp(self.spec, self.params, self.data, self.labels, self.proxies)
        if not np.isfinite(dtp):
            return False
        step = len(self.trace.steps)
        self.trace.epochs.append(EpochRecord(epoch=step // self.steps_per_epoch, step=step, avg_dtp=dtp))
        return dtp <= self.cfg.divergence_dtp_factor * self.trace.initial_avg_dtp

    def finish(self, diverged: bool) -> TrainTrace:
        self.trace.params, self.trace.proxies, self.trace.diverged = self.params, self.proxies, diverged
        self.trace.model_optimizer = self.model_optimizer.state_dict()
        self.trace.proxy_optimizer = self.proxy_optimizer.state_dict()
        self.trace.sampler_state = self.sampler.rng_state
        return self.trace


def train(data: np.ndarray, labels: np.ndarray, embedder: EmbedderSpec, cfg: TrainConfig) -> TrainTrace:
    """
    Train ``embedder`` and one proxy per class: ``cfg.phase1.steps`` steps with the first loss, then
    ``cfg.phase2.steps`` with the second one and scaled learning rates. The loss is recorded every step and AvgDTP
    over the whole training set every ``steps_per_epoch`` steps.

    A non-finite loss, embedding, gradient or AvgDTP, or an AvgDTP above ``cfg.divergence_dtp_factor`` times its
    initial value, stops the run; the returned trace then ends at the last finite result and is flagged diverged.

    :param data: ``(N, input_dim)`` features.
    :param labels: ``N`` class labels ``0 .. C - 1``.
    :param embedder: Architecture.
    :param cfg: Training configuration.
    :return: The trace, reproducible bit for bit from ``cfg.seed``.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if data.ndim != 2 or data.shape[0] != labels.shape[0]:
        raise exceptions.LossInputError(f"{data.shape[0]} feature rows do not match {labels.shape[0]} labels")
    if data.shape[1] != embedder.input_dim:
        raise exceptions.EmbedderError(
            f"Features have {data.shape[1]} columns, the embedder expects {embedder.input_dim}"
        )

    alpha1, alpha2 = cfg.phase1.alpha, cfg.phase2.alpha
    if alpha1 is not None and alpha2 is not None and alpha2 >= alpha1 and cfg.phase2.steps > 0:
        logger.warning(f"Second phase alpha {alpha2} is not lower than the first phase alpha {alpha1}")

    run = _Run(data, labels, embedder, cfg)
    logger.info(f"Training on {len(labels)} samples, initial AvgDTP {run.trace.initial_avg_dtp:.4g}")
    with np.errstate(over="ignore", invalid="ignore"):
        for phase_index, phase in ((1, cfg.phase1), (2, cfg.phase2)):
            run.model_optimizer.lr = cfg.lr_model * phase.lr_multiplier
            run.proxy_optimizer.lr = cfg.lr_proxies * phase.lr_multiplier
            for _ in progress(range(phase.steps), desc=f"Phase {phase_index}"):
                if not run.step(phase_index, phase):
                    logger.warning(f"Training diverged at step {len(run.trace.steps) + 1}")
                    return run.finish(diverged=True)
                step = run.trace.steps[-1].step
                if step % run.steps_per_epoch == 0 and not run.end_of_epoch():
                    logger.warning(f"AvgDTP diverged after step {step}")
                    return run.finish(diverged=True)

    logger.info(f"Finished {len(run.trace.steps)} steps, final AvgDTP {run.trace.final_avg_dtp:.4g}")
    return run.finish(diverged=False)
