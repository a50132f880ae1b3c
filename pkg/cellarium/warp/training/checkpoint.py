"""
HDF5 checkpoints of a training run.

Layout (format version 1)::

    /                       attrs: format_version, seed, step, diverged, embedder (EmbedderSpec JSON),
                                   sampler_rng (PCG64 state JSON)
    /embedder/<name>        one dataset per parameter (W0, b0, ..., ln_gain, ln_bias)
    /proxies                (C, D) dataset
    /optimizer/model        attrs: step, lr, betas, eps; groups m/ and v/ with one dataset per parameter
    /optimizer/proxies      same, for the single parameter ``proxies``

Datasets and groups are written without timestamps so that equal runs produce byte-identical files.
"""

import json
import os
import typing as t
from dataclasses import dataclass

import h5py
import numpy as np

from cellarium.warp import exceptions, settings
from cellarium.warp.loss import ProxySet
from cellarium.warp.training.embedder import EmbedderSpec, Params
from cellarium.warp.training.trainer import TrainTrace


@dataclass
class Checkpoint:
    embedder: EmbedderSpec
    params: Params
    proxies: ProxySet
    model_optimizer: t.Dict[str, t.Any]
    proxy_optimizer: t.Dict[str, t.Any]
    sampler_state: t.Dict[str, t.Any]
    seed: int
    step: int
    diverged: bool = False

    @classmethod
    def from_trace(cls, trace: TrainTrace) -> "Checkpoint":
        return cls(
            embedder=trace.embedder,
            params=trace.params,
            proxies=trace.proxies,
            model_optimizer=trace.model_optimizer,
            proxy_optimizer=trace.proxy_optimizer,
            sampler_state=trace.sampler_state,
            seed=trace.seed,
            step=len(trace.steps),
            diverged=trace.diverged,
        )


def _create_group(parent: h5py.Group, name: str) -> h5py.Group:
    gcpl = h5py.h5p.create(h5py.h5p.GROUP_CREATE)
    gcpl.set_obj_track_times(False)
    return h5py.Group(h5py.h5g.create(parent.id, name.encode(), gcpl=gcpl))


def _write_arrays(group: h5py.Group, arrays: t.Dict[str, np.ndarray]) -> None:
    for name, value in arrays.items():
        group.create_dataset(name, data=np.asarray(value, dtype=np.float64), track_times=False)


def _read_arrays(group: h5py.Group, names: t.Iterable[str]) -> t.Dict[str, np.ndarray]:
    missing = [name for name in names if name not in group]
    if missing:
        raise exceptions.CheckpointError(f"{group.name} is missing {missing}")
    return {name: group[name][()] for name in names}


def _write_optimizer(group: h5py.Group, state: t.Dict[str, t.Any]) -> None:
    group.attrs["step"] = int(state["step"])
    group.attrs["lr"] = float(state["lr"])
    group.attrs["betas"] = np.asarray(state["betas"], dtype=np.float64)
    group.attrs["eps"] = float(state["eps"])
    _write_arrays(_create_group(group, "m"), state["m"])
    _write_arrays(_create_group(group, "v"), state["v"])


def _read_optimizer(group: h5py.Group, names: t.Iterable[str]) -> t.Dict[str, t.Any]:
    names = list(names)
    return {
        "step": int(group.attrs["step"]),
        "lr": float(group.attrs["lr"]),
        "betas": [float(b) for b in group.attrs["betas"]],
        "eps": float(group.attrs["eps"]),
        "m": _read_arrays(group["m"], names),
        "v": _read_arrays(group["v"], names),
    }


def save_checkpoint(path: t.Union[str, os.PathLike], checkpoint: Checkpoint) -> None:
    """
    Write a checkpoint, replacing any existing file.

    :raises ArtifactIOError: If the file cannot be written.
    """
    try:
        with h5py.File(path, "w", libver="earliest") as f:
            f.attrs["format_version"] = settings.CHECKPOINT_FORMAT_VERSION
            f.attrs["seed"] = int(checkpoint.seed)
            f.attrs["step"] = int(checkpoint.step)
            f.attrs["diverged"] = bool(checkpoint.diverged)
            f.attrs["embedder"] = checkpoint.embedder.model_dump_json()
            f.attrs["sampler_rng"] = json.dumps(checkpoint.sampler_state, sort_keys=True)

            _write_arrays(_create_group(f, "embedder"), checkpoint.params)
            f.create_dataset("proxies", data=checkpoint.proxies.proxies, track_times=False)
            optimizer = _create_group(f, "optimizer")
            _write_optimizer(_create_group(optimizer, "model"), checkpoint.model_optimizer)
            _write_optimizer(_create_group(optimizer, "proxies"), checkpoint.proxy_optimizer)
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write checkpoint {path}: {e}") from e


def load_checkpoint(path: t.Union[str, os.PathLike]) -> Checkpoint:
    """
    Read a checkpoint written by :func:`save_checkpoint`; every array comes back bit for bit.

    :raises CheckpointError: If the file is not a checkpoint of a supported version.
    :raises ArtifactIOError: If the file cannot be opened.
    """
    try:
        f = h5py.File(path, "r")
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not open checkpoint {path}: {e}") from e

    with f:
        version = f.attrs.get("format_version")
        if version != settings.CHECKPOINT_FORMAT_VERSION:
            raise exceptions.CheckpointError(
                f"{path}: unsupported checkpoint format version {version}, "
                f"expected {settings.CHECKPOINT_FORMAT_VERSION}"
            )
        try:
            embedder = EmbedderSpec.model_validate_json(f.attrs["embedder"])
            names = list(embedder.parameter_shapes())
            return Checkpoint(
                embedder=embedder,
                params=_read_arrays(f["embedder"], names),
                proxies=ProxySet(proxies=f["proxies"][()]),
                model_optimizer=_read_optimizer(f["optimizer/model"], names),
                proxy_optimizer=_read_optimizer(f["optimizer/proxies"], ["proxies"]),
                sampler_state=json.loads(f.attrs["sampler_rng"]),
                seed=int(f.attrs["seed"]),
                step=int(f.attrs["step"]),
                diverged=bool(f.attrs["diverged"]),
            )
        except KeyError as e:
            raise exceptions.CheckpointError(f"{path}: missing entry {e}") from e
