import os
from importlib.metadata import PackageNotFoundError, version

DISTRIBUTION_NAME = "cellarium-warp"


def get_version() -> str:
    """
    Get the version of the package from the installed distribution metadata (set from the git tag at build time).

    :return: The version of the package, or the ``WARP_VERSION`` environment variable when not installed.
    """
    try:
        return version(DISTRIBUTION_NAME)
    except PackageNotFoundError:
        return os.environ.get("WARP_VERSION", "0.0.1")
