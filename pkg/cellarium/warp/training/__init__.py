from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .embedder import EmbedderSpec, backward, forward, init_params
from .optimizer import Adam, AdamState, adam_step
from .sampling import ClassBalancedSampler, class_balanced_batches
from .trainer import EpochRecord, PhaseConfig, StepRecord, TrainConfig, TrainTrace, init_proxies, train

__all__ = [
    "EmbedderSpec",
    "TrainConfig",
    "PhaseConfig",
    "TrainTrace",
    "StepRecord",
    "EpochRecord",
    "Checkpoint",
    "Adam",
    "AdamState",
    "ClassBalancedSampler",
    # embedder
    "init_params",
    "forward",
    "backward",
    # optimisation
    "adam_step",
    "class_balanced_batches",
    "init_proxies",
    "train",
    # checkpoints
    "save_checkpoint",
    "load_checkpoint",
]
