from .grid import (
    GridSpec,
    LandscapeGrid,
    LineProfile,
    evaluate_along_line,
    evaluate_grid,
    evaluate_points_grid,
    export_grid,
    find_extrema,
    import_grid,
    loss_on_points,
    outbound_reach,
    sample_line,
    summarize_extrema,
)
from .suite import run_property_suite
from .verification import verify_lemma, verify_prop

__all__ = [
    "GridSpec",
    "LandscapeGrid",
    "LineProfile",
    # grid
    "evaluate_grid",
    "evaluate_points_grid",
    "evaluate_along_line",
    "sample_line",
    "find_extrema",
    "loss_on_points",
    "outbound_reach",
    "summarize_extrema",
    "export_grid",
    "import_grid",
    # verifiers
    "verify_lemma",
    "verify_prop",
    "run_property_suite",
]
