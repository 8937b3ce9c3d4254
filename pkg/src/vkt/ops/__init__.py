from .analysis import (
    Aggregates,
    Histogram,
    brick_decompose,
    compute_aggregates,
    compute_aggregates_range,
    compute_histogram,
    compute_histogram_range,
)
from .core import (
    ArithmeticOp,
    arithmetic,
    arithmetic_range,
    crop,
    crop_hierarchical,
    delete,
    fill,
    fill_range,
    resample,
    transform,
    transform_range,
)
from .filters import ClaheParams, Kernel, apply_filter, clahe_equalize, gaussian_kernel
from .geometric import flip, rotate, rotate_range, scale, scale_range

__all__ = [
    "Aggregates",
    "ArithmeticOp",
    "ClaheParams",
    "Histogram",
    "Kernel",
    "apply_filter",
    "arithmetic",
    "arithmetic_range",
    "brick_decompose",
    "clahe_equalize",
    "compute_aggregates",
    "compute_aggregates_range",
    "compute_histogram",
    "compute_histogram_range",
    "crop",
    "crop_hierarchical",
    "delete",
    "fill",
    "fill_range",
    "flip",
    "gaussian_kernel",
    "resample",
    "rotate",
    "rotate_range",
    "scale",
    "scale_range",
    "transform",
    "transform_range",
]
