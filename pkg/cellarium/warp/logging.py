import logging
import typing as t

from tqdm import tqdm

from cellarium.warp import settings

logger = logging.getLogger("cellarium.warp")
logger.setLevel(settings.LOGGING_LEVEL)

# Avoid stacking handlers when the module is reloaded (e.g. in notebooks)
if not logger.handlers:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(fmt=settings.LOGGING_FORMAT, datefmt=settings.LOGGING_DATE_FORMAT))
    logger.addHandler(handler)

T = t.TypeVar("T")


def set_verbosity(verbose: bool) -> None:
    """
    Switch the package logger between the default level and DEBUG.

    :param verbose: Whether to emit debug messages.
    """
    logger.setLevel(logging.DEBUG if verbose else settings.LOGGING_LEVEL)


def progress(iterable: t.Iterable[T], desc: str, total: t.Optional[int] = None) -> t.Iterable[T]:
    """
    Wrap a long loop in a progress bar, the notebook widget in interactive sessions. Bars are hidden when the logger
    is above INFO.

    :param iterable: The loop.
    :param desc: Label of the bar.
    :param total: Number of iterations, if ``iterable`` has no length.
    """
    disable = not logger.isEnabledFor(logging.INFO)
    if settings.is_interactive_environment():
        from tqdm.notebook import tqdm as notebook_tqdm

        return notebook_tqdm(iterable, desc=desc, total=total, disable=disable)
    return tqdm(iterable, desc=desc, total=total, disable=disable, leave=False)
