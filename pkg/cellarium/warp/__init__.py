from cellarium.warp.loss import LossConfig, ProxySet
from cellarium.warp.warping import WarpPair, WarpSpec, parse_warp_pair

from . import (
    config,
    constants,
    datasets,
    exceptions,
    experiments,
    geometry,
    landscape,
    logging,
    loss,
    metrics,
    models,
    settings,
    training,
    version,
    warping,
)

__version__ = version.get_version()

__all__ = [
    "WarpSpec",
    "WarpPair",
    "LossConfig",
    "ProxySet",
    "parse_warp_pair",
    "config",
    "constants",
    "datasets",
    "exceptions",
    "experiments",
    "geometry",
    "landscape",
    "logging",
    "loss",
    "metrics",
    "models",
    "settings",
    "training",
    "version",
    "warping",
]
