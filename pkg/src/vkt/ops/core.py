"""Core volume algorithms: fill, crop, delete, transform, resample, arithmetic.

Every range variant takes a half-open box of cell coordinates
(logical-grid coordinates for hierarchical volumes); the whole-volume
variant is the range variant over the full box.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from ..errors import DimsMismatch, EmptyRange, InvalidArgument, NotASlab, RangeOutOfBounds
from ..execution import parallel_for, slab_ranges, timed
from ..geom import Box3i, Vec3i, box3i, clip_box, full_box
from ..hier import HierarchicalVolume, Subgrid
from ..volume import DataFormat, StructuredVolume, VoxelMapping, quantize, sample_grid_linear

AnyVolume = Union[StructuredVolume, HierarchicalVolume]


def _coerce_box(roi) -> Box3i:
    if isinstance(roi, Box3i):
        return roi
    return box3i(*roi)


def _volume_box(volume: AnyVolume) -> Box3i:
    if isinstance(volume, StructuredVolume):
        return volume.bounds
    return full_box(volume.logical_dims)


# -- fill -------------------------------------------------------------------


@timed("FillRange")
def fill_range(volume: AnyVolume, roi, value: float) -> None:
    """Set every cell inside `roi` to `value`.

    Hierarchical volumes assign only cells whose logical footprint lies
    fully inside the box, so coarse cells straddling the boundary keep
    their values.
    """
    roi = clip_box(_coerce_box(roi), _volume_box(volume))
    if roi.is_empty:
        return
    if isinstance(volume, StructuredVolume):
        arr = volume.array()
        arr[roi.lower.z : roi.upper.z, roi.lower.y : roi.upper.y, roi.lower.x : roi.upper.x] = (
            quantize(value, volume.format, volume.mapping)
        )
        return
    for i in range(volume.subgrid_count):
        sg = volume.subgrid(i)
        span = _contained_cells(sg, roi)
        if span is None:
            continue
        (x0, x1), (y0, y1), (z0, z1) = span
        sg.data[z0:z1, y0:y1, x0:x1] = np.float32(value)


def fill(volume: AnyVolume, value: float) -> None:
    fill_range(volume, _volume_box(volume), value)


def _contained_cells(sg: Subgrid, roi: Box3i):
    """Index spans of cells whose logical box lies fully inside roi."""
    w = sg.cell_width
    spans = []
    for a in range(3):
        lo = roi.lower[a] - sg.lower_logical[a]
        hi = roi.upper[a] - sg.lower_logical[a]
        i0 = max(0, -((-lo) // w))
        i1 = min(sg.dims_cells[a], hi // w)
        if i0 >= i1:
            return None
        spans.append((i0, i1))
    return spans


# -- crop / delete -----------------------------------------------------------


@timed("Crop")
def crop(volume: StructuredVolume, roi) -> StructuredVolume:
    """Copy of the cells in `roi`; geometry metadata is inherited."""
    roi = _coerce_box(roi)
    if roi.is_empty:
        raise EmptyRange(f"crop roi {roi} selects no cells")
    if not volume.bounds.contains_box(roi):
        raise RangeOutOfBounds(f"crop roi {roi} exceeds dims {tuple(volume.dims)}")
    out = StructuredVolume(roi.dims, volume.format, volume.cell_size, volume.mapping)
    src = volume.array()
    out.array()[...] = src[
        roi.lower.z : roi.upper.z, roi.lower.y : roi.upper.y, roi.lower.x : roi.upper.x
    ]
    return out


@timed("CropHierarchical")
def crop_hierarchical(volume: HierarchicalVolume, roi) -> HierarchicalVolume:
    """Clip subgrids to `roi`, keeping cells fully inside.

    Surviving subgrid corners are re-anchored to roi.lower, so the
    result's logical grid spans exactly the roi box.
    """
    roi = _coerce_box(roi)
    if roi.is_empty:
        raise EmptyRange(f"crop roi {roi} selects no cells")
    kept = []
    for i in range(volume.subgrid_count):
        sg = volume.subgrid(i)
        span = _contained_cells(sg, roi)
        if span is None:
            continue
        (x0, x1), (y0, y1), (z0, z1) = span
        w = sg.cell_width
        lower = Vec3i(
            sg.lower_logical.x + x0 * w - roi.lower.x,
            sg.lower_logical.y + y0 * w - roi.lower.y,
            sg.lower_logical.z + z0 * w - roi.lower.z,
        )
        kept.append(
            Subgrid(sg.level, lower, Vec3i(x1 - x0, y1 - y0, z1 - z0),
                    sg.data[z0:z1, y0:y1, x0:x1].copy())
        )
    # Re-anchoring can break level alignment relative to the new origin,
    # which is fine for sampling; skip the constructor's alignment check.
    return HierarchicalVolume(kept, volume.mapping, logical_dims=roi.dims, _validate=False)


@timed("Delete")
def delete(volume: StructuredVolume, roi) -> StructuredVolume:
    """Remove a slab: `roi` must span the full extent on exactly two axes."""
    roi = clip_box(_coerce_box(roi), volume.bounds)
    spanned = [
        roi.lower[a] == 0 and roi.upper[a] == volume.dims[a] and not roi.is_empty
        for a in range(3)
    ]
    if sum(spanned) == 3:
        raise EmptyRange("deleting the whole volume leaves an empty result")
    if sum(spanned) != 2:
        raise NotASlab(f"roi {roi} does not span the volume on exactly two axes")
    axis = spanned.index(False)
    arr = volume.array()
    np_axis = 2 - axis  # arrays are (z, y, x)
    before = [slice(None)] * 3
    after = [slice(None)] * 3
    before[np_axis] = slice(0, roi.lower[axis])
    after[np_axis] = slice(roi.upper[axis], volume.dims[axis])
    merged = np.concatenate([arr[tuple(before)], arr[tuple(after)]], axis=np_axis)
    dims = list(volume.dims)
    dims[axis] = merged.shape[np_axis]
    out = StructuredVolume(dims, volume.format, volume.cell_size, volume.mapping)
    out.array()[...] = merged
    return out


# -- transform (per-cell callback) -------------------------------------------


@timed("TransformRange")
def transform_range(
    volume: StructuredVolume, roi, fn: Callable[[Vec3i, float], float]
) -> None:
    """Apply ``fn(index, mapped_value) -> new_value`` to each cell in roi.

    The callback must be pure; cells are visited exactly once in an
    unspecified order and may be evaluated concurrently.
    """
    roi = clip_box(_coerce_box(roi), volume.bounds)
    if roi.is_empty:
        return
    arr = volume.array()
    mapped = volume.mapped_array()

    def run_slab(block: int) -> None:
        z0, z1 = slabs[block]
        for k in range(roi.lower.z + z0, roi.lower.z + z1):
            for j in range(roi.lower.y, roi.upper.y):
                row = np.empty(roi.dims.x, dtype=np.float64)
                for n, i in enumerate(range(roi.lower.x, roi.upper.x)):
                    row[n] = fn(Vec3i(i, j, k), float(mapped[k, j, i]))
                arr[k, j, roi.lower.x : roi.upper.x] = quantize(
                    row, volume.format, volume.mapping
                )

    slabs = slab_ranges(roi.dims.z)
    parallel_for(len(slabs), run_slab)


def transform(volume: StructuredVolume, fn: Callable[[Vec3i, float], float]) -> None:
    transform_range(volume, volume.bounds, fn)


# -- resample -----------------------------------------------------------------


@timed("Resample")
def resample(
    source: AnyVolume,
    dst_dims,
    dst_format: Optional[DataFormat] = None,
    dst_mapping=None,
) -> StructuredVolume:
    """Resample onto a structured grid of `dst_dims` cells.

    Destination cell centers map uniformly onto the source extent;
    structured sources are sampled trilinearly, hierarchical sources
    with basis interpolation in logical coordinates.  The destination
    keeps the source's world extent.
    """
    dst_dims = Vec3i(*(int(v) for v in dst_dims))
    if min(dst_dims) < 1:
        raise InvalidArgument(f"resample target dims must be >= 1, got {tuple(dst_dims)}")

    if isinstance(source, StructuredVolume):
        src_dims = source.dims
        if dst_format is None:
            dst_format = source.format
        src_cell = np.asarray(source.cell_size, dtype=np.float64)
        dst_cell = src_cell * np.asarray(src_dims, dtype=np.float64) / np.asarray(dst_dims, dtype=np.float64)
        grid = source.mapped_array()

        def sampler(pts_cells: np.ndarray) -> np.ndarray:
            return sample_grid_linear(grid, np.ones(3), pts_cells)

        extent_cells = np.asarray(src_dims, dtype=np.float64)
    else:
        if dst_format is None:
            dst_format = DataFormat.FLOAT32
        extent_cells = np.asarray(source.logical_dims, dtype=np.float64)
        dst_cell = extent_cells / np.asarray(dst_dims, dtype=np.float64)
        sampler = source.sample_basis_many

    if dst_mapping is None:
        dst_mapping = source.mapping
    dst_mapping = VoxelMapping.coerce(dst_mapping)
    if not isinstance(dst_format, DataFormat):
        dst_format = DataFormat.parse(dst_format)

    out = StructuredVolume(dst_dims, dst_format, tuple(dst_cell), dst_mapping)
    arr = out.array()
    # Source positions in source cell units: (i + 0.5) * srcExtent/dstDims.
    scale = extent_cells / np.asarray(dst_dims, dtype=np.float64)
    xs = (np.arange(dst_dims.x, dtype=np.float64) + 0.5) * scale[0]
    ys = (np.arange(dst_dims.y, dtype=np.float64) + 0.5) * scale[1]
    slabs = slab_ranges(dst_dims.z, min_thickness=1)

    def run_slab(block: int) -> None:
        z0, z1 = slabs[block]
        zs = (np.arange(z0, z1, dtype=np.float64) + 0.5) * scale[2]
        zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
        pts = np.stack([xx.reshape(-1), yy.reshape(-1), zz.reshape(-1)], axis=1)
        vals = sampler(pts).reshape(z1 - z0, dst_dims.y, dst_dims.x)
        arr[z0:z1] = quantize(vals, dst_format, dst_mapping)

    parallel_for(len(slabs), run_slab)
    return out


# -- voxel-wise arithmetic ------------------------------------------------------


class ArithmeticOp(Enum):
    SUM = "sum"
    DIFF = "diff"
    PROD = "prod"
    QUOT = "quot"
    ABS_DIFF = "absdiff"

    @classmethod
    def parse(cls, name: str) -> "ArithmeticOp":
        for op in cls:
            if op.value == name.strip().lower():
                return op
        raise InvalidArgument(f"unknown arithmetic op {name!r}")


@timed("ArithmeticRange")
def arithmetic_range(
    op: ArithmeticOp,
    dest: StructuredVolume,
    a: StructuredVolume,
    b: StructuredVolume,
    roi,
) -> None:
    """dest <- op(a, b) over mapped values inside roi; Quot(x, 0) = 0."""
    for v in (dest, a, b):
        if not isinstance(v, StructuredVolume):
            raise InvalidArgument("arithmetic is defined for structured volumes only")
    for other in (a, b):
        if tuple(other.dims) != tuple(dest.dims) or other.mapping != dest.mapping:
            raise DimsMismatch(
                "arithmetic operands must share dims and mapping: "
                f"{tuple(other.dims)}/{tuple(other.mapping)} vs "
                f"{tuple(dest.dims)}/{tuple(dest.mapping)}"
            )
    roi = clip_box(_coerce_box(roi), dest.bounds)
    if roi.is_empty:
        return
    sel = (
        slice(roi.lower.z, roi.upper.z),
        slice(roi.lower.y, roi.upper.y),
        slice(roi.lower.x, roi.upper.x),
    )
    ma = a.mapped_array()[sel]
    mb = b.mapped_array()[sel]
    if op is ArithmeticOp.SUM:
        result = ma + mb
    elif op is ArithmeticOp.DIFF:
        result = ma - mb
    elif op is ArithmeticOp.PROD:
        result = ma * mb
    elif op is ArithmeticOp.QUOT:
        result = np.zeros_like(ma)
        np.divide(ma, mb, out=result, where=mb != 0.0)
    elif op is ArithmeticOp.ABS_DIFF:
        result = np.abs(ma - mb)
    else:  # pragma: no cover
        raise InvalidArgument(f"unhandled op {op}")
    dest.array()[sel] = quantize(result, dest.format, dest.mapping)


def arithmetic(op: ArithmeticOp, dest: StructuredVolume, a: StructuredVolume, b: StructuredVolume) -> None:
    arithmetic_range(op, dest, a, b, dest.bounds)
