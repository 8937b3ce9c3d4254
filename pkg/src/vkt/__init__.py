"""vkt: a 3D volume manipulation toolkit.

Structured and hierarchical (multi-level subgrid) volumes, deferred
device-residency management, a catalog of manipulation and analysis
algorithms, a headless three-mode renderer, and the ``vkt`` CLI.
"""

from . import errors
from .bench import run_benchmarks, synthetic_hierarchical, synthetic_structured
from .errors import VktError
from .execution import (
    Device,
    ExecutionPolicy,
    effective_workers,
    get_execution_policy,
    hardware_concurrency,
    set_execution_policy,
    set_hardware_concurrency_override,
)
from .geom import Box3i, Vec3f, Vec3i, box3i, full_box
from .hier import (
    Bvh,
    HierarchicalVolume,
    Subgrid,
    active_brick_region,
    build_bvh,
    create_hierarchical_volume,
)
from .image import ImageRGBA, decode_pfm, encode_pfm, encode_ppm, write_image
from .io import (
    DataSource,
    load_raw,
    read_range,
    read_volume,
    volume_from_bytes,
    volume_to_bytes,
    write_range,
    write_volume,
)
from .managed import INVALID_HANDLE, ManagedBuffer, emulated_device, registry
from .ops import (
    Aggregates,
    ArithmeticOp,
    ClaheParams,
    Histogram,
    Kernel,
    apply_filter,
    arithmetic,
    arithmetic_range,
    brick_decompose,
    clahe_equalize,
    compute_aggregates,
    compute_aggregates_range,
    compute_histogram,
    compute_histogram_range,
    crop,
    crop_hierarchical,
    delete,
    fill,
    fill_range,
    flip,
    gaussian_kernel,
    resample,
    rotate,
    rotate_range,
    scale,
    scale_range,
    transform,
    transform_range,
)
from .render import (
    Camera,
    RenderAlgo,
    RenderState,
    classify,
    render,
    render_implicit_iso,
    render_ray_marching,
    render_multi_scattering,
)
from .volume import (
    DataFormat,
    LookupTable,
    StructuredVolume,
    VoxelMapping,
    create_structured_volume,
)

__version__ = "0.1.0"
