"""
Shared configuration of the integration tests.

The IDX smoke test reads a real image/label file pair (e.g. a FashionMNIST test split), passed with
``--idx_images_path`` and ``--idx_labels_path`` or the ``IDX_IMAGES_PATH`` and ``IDX_LABELS_PATH`` environment
variables. It is skipped when they are not set.
"""

import os
import typing as t

import pytest


def pytest_addoption(parser: pytest.Parser):
    """Add options to pytest args"""
    parser.addoption(
        "--idx_images_path", action="store", default=os.getenv("IDX_IMAGES_PATH"), help="IDX image file"
    )
    parser.addoption(
        "--idx_labels_path", action="store", default=os.getenv("IDX_LABELS_PATH"), help="IDX label file"
    )


@pytest.fixture
def idx_paths(request: pytest.FixtureRequest) -> t.Tuple[str, str]:
    """Get the IDX file pair from parser's options, skipping the test if either is missing"""
    images = request.config.getoption("--idx_images_path")
    labels = request.config.getoption("--idx_labels_path")
    if not images or not labels:
        pytest.skip("IDX files not given")
    return images, labels
