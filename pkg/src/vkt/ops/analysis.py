"""Statistics and domain decomposition: aggregates, histograms, bricks.

Reductions run over a deterministic blocking of the scan order
(z-slabs for structured volumes, whole subgrids for hierarchical ones)
and combine block partials in a balanced binary tree, so float results
are identical for any worker count.  Extremal positions report the
first extremal cell in x-fastest scan order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyRange, InvalidArgument
from ..execution import map_blocks, pairwise_reduce, slab_ranges, timed
from ..geom import Box3i, Vec3i, box3i, clip_box, full_box, ivec3
from ..hier import HierarchicalVolume
from ..volume import StructuredVolume, VoxelMapping


@dataclass
class Aggregates:
    min: float
    max: float
    argmin: Vec3i
    argmax: Vec3i
    mean: float
    stddev: float


@dataclass
class Histogram:
    num_bins: int
    counts: np.ndarray
    range: VoxelMapping


@dataclass
class _Partial:
    count: int
    vmin: float
    argmin: Vec3i
    vmax: float
    argmax: Vec3i
    total: float
    total_sq: float


def _partial_of(vals: np.ndarray, coords_of_flat) -> _Partial:
    flat = vals.reshape(-1)
    imin = int(np.argmin(flat))
    imax = int(np.argmax(flat))
    return _Partial(
        count=flat.size,
        vmin=float(flat[imin]),
        argmin=coords_of_flat(imin),
        vmax=float(flat[imax]),
        argmax=coords_of_flat(imax),
        total=float(np.sum(flat)),
        total_sq=float(np.sum(flat * flat)),
    )


def _combine(a: _Partial, b: _Partial) -> _Partial:
    # ties keep the left operand: blocks are ordered by scan position
    vmin, argmin = (b.vmin, b.argmin) if b.vmin < a.vmin else (a.vmin, a.argmin)
    vmax, argmax = (b.vmax, b.argmax) if b.vmax > a.vmax else (a.vmax, a.argmax)
    return _Partial(
        a.count + b.count, vmin, argmin, vmax, argmax,
        a.total + b.total, a.total_sq + b.total_sq,
    )


def _finish(p: _Partial) -> Aggregates:
    mean = p.total / p.count
    var = max(0.0, p.total_sq / p.count - mean * mean)
    return Aggregates(p.vmin, p.vmax, p.argmin, p.argmax, mean, math.sqrt(var))


def _coerce_box(roi) -> Box3i:
    return roi if isinstance(roi, Box3i) else box3i(*roi)


@timed("ComputeAggregates")
def compute_aggregates_range(volume, roi) -> Aggregates:
    """Min/max with positions, mean, and population stddev over roi."""
    if isinstance(volume, StructuredVolume):
        roi = clip_box(_coerce_box(roi), volume.bounds)
        if roi.is_empty:
            raise EmptyRange("aggregates need at least one cell")
        mapped = volume.mapped_array()
        slabs = slab_ranges(roi.dims.z)

        def block(i: int) -> _Partial:
            z0, z1 = slabs[i]
            sel = mapped[
                roi.lower.z + z0 : roi.lower.z + z1,
                roi.lower.y : roi.upper.y,
                roi.lower.x : roi.upper.x,
            ]

            def coords(flat: int) -> Vec3i:
                k, rem = divmod(flat, roi.dims.y * roi.dims.x)
                j, i_ = divmod(rem, roi.dims.x)
                return Vec3i(roi.lower.x + i_, roi.lower.y + j, roi.lower.z + z0 + k)

            return _partial_of(sel, coords)

        partials = map_blocks(len(slabs), block)
        return _finish(pairwise_reduce(partials, _combine))

    roi = _coerce_box(roi)
    partials = _hier_partials(volume, roi)
    if not partials:
        raise EmptyRange("aggregates need at least one fully contained subgrid cell")
    return _finish(pairwise_reduce(partials, _combine))


def _hier_partials(volume: HierarchicalVolume, roi: Box3i) -> list[_Partial]:
    from .core import _contained_cells  # shared containment rule

    partials = []

    def block(i: int):
        sg = volume.subgrid(i)
        span = _contained_cells(sg, roi)
        if span is None:
            return None
        (x0, x1), (y0, y1), (z0, z1) = span
        sel = sg.data[z0:z1, y0:y1, x0:x1].astype(np.float64)
        w = sg.cell_width

        def coords(flat: int) -> Vec3i:
            dz, rem = divmod(flat, (y1 - y0) * (x1 - x0))
            dy, dx = divmod(rem, x1 - x0)
            return Vec3i(
                sg.lower_logical.x + (x0 + dx) * w,
                sg.lower_logical.y + (y0 + dy) * w,
                sg.lower_logical.z + (z0 + dz) * w,
            )

        return _partial_of(sel, coords)

    for p in map_blocks(volume.subgrid_count, block):
        if p is not None:
            partials.append(p)
    return partials


def compute_aggregates(volume) -> Aggregates:
    if isinstance(volume, StructuredVolume):
        return compute_aggregates_range(volume, volume.bounds)
    return compute_aggregates_range(volume, full_box(volume.logical_dims))


@timed("ComputeHistogram")
def compute_histogram_range(volume, roi, num_bins: int) -> Histogram:
    """Counts of normalized values over roi, last bin closed at 1."""
    if num_bins < 1:
        raise InvalidArgument(f"histogram needs num_bins >= 1, got {num_bins}")
    lo, hi = volume.mapping.lo, volume.mapping.hi

    def bin_of(mapped: np.ndarray) -> np.ndarray:
        t = np.clip((mapped - lo) / (hi - lo), 0.0, 1.0)
        return np.minimum(num_bins - 1, np.floor(t * num_bins)).astype(np.int64)

    if isinstance(volume, StructuredVolume):
        roi = clip_box(_coerce_box(roi), volume.bounds)
        if roi.is_empty:
            raise EmptyRange("histogram needs at least one cell")
        mapped = volume.mapped_array()
        slabs = slab_ranges(roi.dims.z)

        def block(i: int) -> np.ndarray:
            z0, z1 = slabs[i]
            sel = mapped[
                roi.lower.z + z0 : roi.lower.z + z1,
                roi.lower.y : roi.upper.y,
                roi.lower.x : roi.upper.x,
            ]
            return np.bincount(bin_of(sel).reshape(-1), minlength=num_bins)

        counts = pairwise_reduce(map_blocks(len(slabs), block), np.add)
        return Histogram(num_bins, counts.astype(np.int64), volume.mapping)

    roi = _coerce_box(roi)
    from .core import _contained_cells

    def block(i: int):
        sg = volume.subgrid(i)
        span = _contained_cells(sg, roi)
        if span is None:
            return None
        (x0, x1), (y0, y1), (z0, z1) = span
        sel = sg.data[z0:z1, y0:y1, x0:x1].astype(np.float64)
        return np.bincount(bin_of(sel).reshape(-1), minlength=num_bins)

    parts = [p for p in map_blocks(volume.subgrid_count, block) if p is not None]
    if not parts:
        raise EmptyRange("histogram needs at least one fully contained subgrid cell")
    counts = pairwise_reduce(parts, np.add)
    return Histogram(num_bins, counts.astype(np.int64), volume.mapping)


def compute_histogram(volume, num_bins: int) -> Histogram:
    if isinstance(volume, StructuredVolume):
        return compute_histogram_range(volume, volume.bounds, num_bins)
    return compute_histogram_range(volume, full_box(volume.logical_dims), num_bins)


@timed("BrickDecompose")
def brick_decompose(
    volume: StructuredVolume, brick_size, halo_low=(0, 0, 0), halo_high=(0, 0, 0)
) -> list[tuple[Vec3i, StructuredVolume]]:
    """Tile the volume into bricks with optional clamp-filled ghost cells.

    Bricks are emitted x-fastest; each entry is (core lower corner in
    source coordinates, brick volume of core + halo cells).
    """
    brick_size = ivec3(brick_size, "brick size")
    halo_low = ivec3(halo_low, "halo low")
    halo_high = ivec3(halo_high, "halo high")
    if min(brick_size) < 1:
        raise InvalidArgument(f"brick size must be >= 1, got {tuple(brick_size)}")
    if min(halo_low) < 0 or min(halo_high) < 0:
        raise InvalidArgument("halos must be >= 0")
    arr = volume.array()
    dims = volume.dims
    counts = Vec3i(*(-(-dims[a] // brick_size[a]) for a in range(3)))
    out: list[tuple[Vec3i, StructuredVolume]] = []
    for bz in range(counts.z):
        for by in range(counts.y):
            for bx in range(counts.x):
                lo = Vec3i(bx * brick_size.x, by * brick_size.y, bz * brick_size.z)
                core = Vec3i(*(min(brick_size[a], dims[a] - lo[a]) for a in range(3)))
                idx = [
                    np.clip(
                        np.arange(lo[a] - halo_low[a], lo[a] + core[a] + halo_high[a]),
                        0,
                        dims[a] - 1,
                    )
                    for a in range(3)
                ]
                brick = StructuredVolume(
                    (len(idx[0]), len(idx[1]), len(idx[2])),
                    volume.format,
                    volume.cell_size,
                    volume.mapping,
                )
                brick.array()[...] = arr[np.ix_(idx[2], idx[1], idx[0])]
                out.append((lo, brick))
    return out
