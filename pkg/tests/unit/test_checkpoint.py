import itertools

import h5py
import numpy as np
import pytest

from cellarium.warp import exceptions
from cellarium.warp.training import (
    Checkpoint,
    EmbedderSpec,
    TrainConfig,
    class_balanced_batches,
    load_checkpoint,
    save_checkpoint,
    train,
)


@pytest.fixture(scope="module")
def trace():
    rng = np.random.RandomState(0)
    labels = np.repeat(np.arange(3), 8)
    data = rng.normal(scale=4.0, size=(3, 5))[labels] + rng.normal(size=(24, 5))
    embedder = EmbedderSpec(layer_widths=[5, 8, 3], layer_norm_output=True)
    cfg = TrainConfig(
        batch_size=6,
        samples_per_class=2,
        lr_model=0.01,
        lr_proxies=0.02,
        phase1={"steps": 5, "loss": {"warp": "pwl(3,0.65,1.5) - t"}},
        phase2={"steps": 2, "loss": {"warp": "pwl(2,0.65,1.5) - t"}},
    )
    return train(data, labels, embedder, cfg)


def test_round_trip_is_bit_exact(tmp_path, trace):
    path = tmp_path / "run.h5"
    save_checkpoint(path, Checkpoint.from_trace(trace))
    restored = load_checkpoint(path)

    assert restored.embedder == trace.embedder
    assert (restored.seed, restored.step, restored.diverged) == (0, 7, False)
    assert restored.params.keys() == trace.params.keys()
    for name, value in trace.params.items():
        np.testing.assert_array_equal(restored.params[name], value)
    np.testing.assert_array_equal(restored.proxies.proxies, trace.proxies.proxies)
    for restored_state, state in [
        (restored.model_optimizer, trace.model_optimizer),
        (restored.proxy_optimizer, trace.proxy_optimizer),
    ]:
        assert restored_state["step"] == state["step"]
        assert restored_state["lr"] == state["lr"]
        assert restored_state["betas"] == list(state["betas"])
        for name in state["m"]:
            np.testing.assert_array_equal(restored_state["m"][name], state["m"][name])
            np.testing.assert_array_equal(restored_state["v"][name], state["v"][name])
    assert restored.sampler_state == trace.sampler_state


def test_sampler_state_resumes_batches(tmp_path, trace):
    path = tmp_path / "run.h5"
    save_checkpoint(path, Checkpoint.from_trace(trace))
    labels = np.repeat(np.arange(3), 8)

    original = class_balanced_batches(labels, 6, 2, seed=0)
    original.rng_state = trace.sampler_state
    resumed = class_balanced_batches(labels, 6, 2, seed=0)
    resumed.rng_state = load_checkpoint(path).sampler_state

    for a, b in zip(itertools.islice(original, 5), itertools.islice(resumed, 5)):
        np.testing.assert_array_equal(a, b)


def test_equal_checkpoints_are_byte_identical(tmp_path, trace):
    first, second = tmp_path / "a.h5", tmp_path / "b.h5"
    save_checkpoint(first, Checkpoint.from_trace(trace))
    save_checkpoint(second, Checkpoint.from_trace(trace))
    assert first.read_bytes() == second.read_bytes()


def test_unsupported_version(tmp_path, trace):
    path = tmp_path / "run.h5"
    save_checkpoint(path, Checkpoint.from_trace(trace))
    with h5py.File(path, "a") as f:
        f.attrs["format_version"] = 99

    with pytest.raises(exceptions.CheckpointError, match="version 99"):
        load_checkpoint(path)


def test_missing_entry(tmp_path, trace):
    path = tmp_path / "run.h5"
    save_checkpoint(path, Checkpoint.from_trace(trace))
    with h5py.File(path, "a") as f:
        del f["embedder/W1"]

    with pytest.raises(exceptions.CheckpointError, match="W1"):
        load_checkpoint(path)


def test_unreadable_paths(tmp_path, trace):
    with pytest.raises(exceptions.ArtifactIOError):
        load_checkpoint(tmp_path / "missing.h5")
    with pytest.raises(exceptions.ArtifactIOError):
        save_checkpoint(tmp_path / "no" / "such" / "dir.h5", Checkpoint.from_trace(trace))
