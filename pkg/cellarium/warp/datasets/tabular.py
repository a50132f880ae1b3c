"""
Datasets as CSV files with the header ``label,f0,f1,...`` and one sample per row.
"""

import os
import re
import typing as t

import numpy as np
import pandas as pd

from cellarium.warp import constants, exceptions, settings
from cellarium.warp.datasets.dataset import Dataset

LABEL_COLUMN = "label"
_LINE_PATTERN = re.compile(r"line (\d+)")


def _feature_columns(dim: int) -> t.List[str]:
    return [f"f{i}" for i in range(dim)]


def save_csv(dataset: Dataset, path: t.Union[str, os.PathLike]) -> None:
    """
    Write ``dataset`` so that :func:`load_csv` restores it exactly.

    :raises ArtifactIOError: If the file cannot be written.
    """
    frame = pd.DataFrame(dataset.features, columns=_feature_columns(dataset.dim))
    frame.insert(0, LABEL_COLUMN, dataset.labels)
    try:
        frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write dataset {path}: {e}") from e


def _first_invalid(source: str, column: str, invalid: t.Union[pd.Series, np.ndarray], reason: str) -> None:
    rows = np.flatnonzero(np.asarray(invalid, dtype=bool))
    if rows.size:
        # the header is line 1
        line = int(rows[0]) + 2
        raise exceptions.DatasetFormatError(source=source, field=column, line=line, reason=reason)


def load_csv(path: t.Union[str, os.PathLike], split: constants.DatasetSplit = constants.DatasetSplit.TRAIN) -> Dataset:
    """
    Read a dataset written by :func:`save_csv` or by hand, keeping the row order.

    :param path: CSV file with the header ``label,f0,...,f{D-1}``.
    :param split: Split tag of the result.
    :raises DatasetFormatError: On a bad header or a malformed row, naming its line.
    :raises ArtifactIOError: If the file cannot be read.
    """
    source = os.fspath(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise exceptions.DatasetFormatError(source=source, field="header", reason="file is empty") from e
    except pd.errors.ParserError as e:
        match = _LINE_PATTERN.search(str(e))
        raise exceptions.DatasetFormatError(
            source=source, field="row", line=int(match.group(1)) if match else None, reason="wrong number of fields"
        ) from e
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not read dataset {source}: {e}") from e

    columns = list(frame.columns)
    expected = [LABEL_COLUMN, *_feature_columns(len(columns) - 1)]
    if len(columns) < 2 or columns != expected:
        raise exceptions.DatasetFormatError(
            source=source, field="header", line=1, reason=f"expected {','.join(expected[:3])},..., got {columns}"
        )
    if frame.empty:
        raise exceptions.DatasetFormatError(source=source, field="rows", reason="no samples after the header")

    labels = frame[LABEL_COLUMN].str.strip()
    _first_invalid(source, LABEL_COLUMN, ~labels.str.fullmatch(r"\d+", na=False), "not a non-negative integer")
    features = frame[columns[1:]].apply(lambda column: column.str.strip())
    for column in columns[1:]:
        parsed = pd.to_numeric(features[column], errors="coerce")
        _first_invalid(source, column, ~np.isfinite(parsed.to_numpy(dtype=np.float64)), "not a finite number")

    return Dataset(
        features=features.to_numpy(dtype=str).astype(np.float64),
        labels=labels.to_numpy(dtype=str).astype(np.int64),
        split=split,
    )
