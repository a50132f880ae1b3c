import logging

# Geometry
ZERO_DISTANCE_EPSILON = 1e-12
UNIT_DIRECTION_TOLERANCE = 1e-12

# Warp functions
POWER_DERIVATIVE_CLAMP = 1e-12
MONOTONICITY_PROBE_POINTS = 10_000
MONOTONICITY_TOLERANCE = 1e-12

# Landscape
GRID_MIN_RESOLUTION = 16
GRID_MAX_RESOLUTION = 4096
GRID_CHUNK_ROWS = 256
PLATEAU_TOLERANCE = 1e-12
DISK_NUM_RADII = 8
DISK_NUM_ANGLES = 720
DISK_ANGLE_TOLERANCE = 2
PROP_STEP_FRACTION = 1e-3
PROP_PASS_STEPS = 2
PROP_SLOPE_OFFSET = 0.1
PROP_SPAN_SEPARATIONS = 3.0

# Gradient checks
GRADCHECK_STEP = 1e-5
GRADCHECK_DENOMINATOR_FLOOR = 1e-3
GRADCHECK_KINK_MARGIN = 1e-3

# Training
LAYER_NORM_EPSILON = 1e-5
ADAM_BETAS = (0.9, 0.999)
ADAM_EPSILON = 1e-8
DIVERGENCE_DTP_FACTOR = 5.0

# Metrics
DEFAULT_RECALL_KS = (1, 2, 4, 8)
NMI_KMEANS_RESTARTS = 20
MAX_BRUTE_FORCE_SAMPLES = 10_000
NEIGHBOR_CHUNK_ROWS = 1024

# Datasets
BLOB_MIN_SEPARATION_NOISE_MULTIPLE = 6.0
BLOB_MAX_REJECTIONS = 100
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
PIXEL_SCALE = 255.0

# Artifacts
CHECKPOINT_FORMAT_VERSION = 1
CSV_FLOAT_FORMAT = "%.17g"
GRID_FILE = "grid.csv"
EXTREMA_FILE = "extrema.json"
VERIFY_FILE = "verify.json"
CHECKPOINT_FILE = "checkpoint.h5"
TRACE_FILE = "trace.csv"
METRICS_FILE = "metrics.json"
SWEEP_FILE = "sweep.csv"
ABLATION_FILE = "ablation.csv"

LOGGING_LEVEL = logging.INFO
LOGGING_FORMAT = "* [%(asctime)s.%(msecs)03d] %(message)s"
LOGGING_DATE_FORMAT = "%H:%M:%S"


def is_interactive_environment() -> bool:
    """
    Check if the current environment is interactive (e.g. Jupyter notebook, IPython terminal)

    :return: True if the current environment is interactive, False otherwise
    """
    import sys

    import __main__

    if hasattr(sys, "ps1"):
        return True
    if not hasattr(__main__, "__file__"):
        return True
    try:
        from IPython import get_ipython

        shell = get_ipython().__class__.__name__
        if shell in ["ZMQInteractiveShell", "TerminalInteractiveShell"]:
            return True
    except (ModuleNotFoundError, NameError):
        pass
    return False
