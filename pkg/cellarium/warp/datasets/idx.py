"""
Raw IDX image and label files (the MNIST family format).

Images: big-endian ``uint32`` magic ``0x00000803``, count, rows, columns, then one ``uint8`` per pixel, row-major.
Labels: big-endian ``uint32`` magic ``0x00000801``, count, then one ``uint8`` per label.
"""

import os
import struct
import typing as t

import numpy as np

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.datasets.dataset import Dataset

_IMAGES_HEADER = struct.Struct(">IIII")
_LABELS_HEADER = struct.Struct(">II")


def _read_bytes(path: t.Union[str, os.PathLike]) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not read IDX file {path}: {e}") from e


def _parse(path: t.Union[str, os.PathLike], header: struct.Struct, magic: int) -> t.Tuple[t.Tuple[int, ...], bytes]:
    source = os.fspath(path)
    data = _read_bytes(path)
    if len(data) < 4:
        raise exceptions.DatasetFormatError(source=source, field="magic", reason="file is shorter than 4 bytes")
    (found,) = struct.unpack_from(">I", data)
    if found != magic:
        raise exceptions.DatasetFormatError(
            source=source, field="magic", reason=f"expected 0x{magic:08x}, got 0x{found:08x}"
        )
    if len(data) < header.size:
        raise exceptions.DatasetFormatError(
            source=source, field="header", reason=f"expected {header.size} header bytes, got {len(data)}"
        )
    _, *dims = header.unpack_from(data)
    payload = data[header.size :]
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise exceptions.DatasetFormatError(
            source=source, field="payload", reason=f"dimensions {dims} need {expected} bytes, got {len(payload)}"
        )
    return tuple(dims), payload


def read_idx_images(path: t.Union[str, os.PathLike]) -> np.ndarray:
    """
    :return: ``(count, rows, columns)`` ``uint8`` pixels.
    """
    (count, rows, columns), payload = _parse(path, _IMAGES_HEADER, settings.IDX_IMAGES_MAGIC)
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, columns)


def read_idx_labels(path: t.Union[str, os.PathLike]) -> np.ndarray:
    (count,), payload = _parse(path, _LABELS_HEADER, settings.IDX_LABELS_MAGIC)
    return np.frombuffer(payload, dtype=np.uint8).reshape(count)


def load_idx(
    images_path: t.Union[str, os.PathLike],
    labels_path: t.Union[str, os.PathLike],
    limit: t.Optional[int] = None,
    split: constants.DatasetSplit = constants.DatasetSplit.TRAIN,
) -> Dataset:
    """
    Load an IDX image/label file pair as flattened features scaled to ``[0, 1]``.

    :param images_path: Image file.
    :param labels_path: Label file.
    :param limit: Keep only the first ``limit`` samples.
    :param split: Split tag of the result.
    :raises DatasetFormatError: On a bad magic number, a truncated file, or differing counts.
    :raises ArtifactIOError: If a file cannot be read.
    """
    if limit is not None and limit < 1:
        raise exceptions.DatasetFormatError(source=os.fspath(images_path), field="limit", reason="must be >= 1")
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise exceptions.DatasetFormatError(
            source=os.fspath(labels_path),
            field="count",
            reason=f"{labels.shape[0]} labels for {images.shape[0]} images",
        )
    images, labels = images[:limit], labels[:limit]
    features = images.reshape(images.shape[0], -1).astype(np.float64) / settings.PIXEL_SCALE
    return Dataset(features=features, labels=labels.astype(np.int64), split=split)


def write_idx(
    images_path: t.Union[str, os.PathLike],
    labels_path: t.Union[str, os.PathLike],
    images: np.ndarray,
    labels: np.ndarray,
) -> None:
    """
    Write ``uint8`` images of shape ``(count, rows, columns)`` and their labels as an IDX file pair.
    """
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    try:
        with open(images_path, "wb") as f:
            f.write(_IMAGES_HEADER.pack(settings.IDX_IMAGES_MAGIC, *images.shape))
            f.write(images.tobytes(order="C"))
        with open(labels_path, "wb") as f:
            f.write(_LABELS_HEADER.pack(settings.IDX_LABELS_MAGIC, labels.shape[0]))
            f.write(labels.tobytes())
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write IDX files: {e}") from e
