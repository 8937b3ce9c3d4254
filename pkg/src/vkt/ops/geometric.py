"""Geometric transforms with subcell accuracy: flip, rotate, scale.

Rotate and scale resample the volume in place against an immutable
snapshot, so overlapping reads and writes are well defined.  Sample
positions falling outside the volume clamp to the boundary, matching
the shared sampler policy.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgument
from ..execution import parallel_for, slab_ranges, timed
from ..geom import Box3i, box3i, clip_box, fvec3
from ..volume import StructuredVolume, quantize, sample_grid_linear

_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}


def _axis_index(axis) -> int:
    if isinstance(axis, str):
        key = axis.strip().lower()
        if key not in _AXIS_NAMES:
            raise InvalidArgument(f"unknown axis {axis!r}")
        return _AXIS_NAMES[key]
    if axis not in (0, 1, 2):
        raise InvalidArgument(f"axis must be x, y, z or 0, 1, 2, got {axis!r}")
    return int(axis)


@timed("Flip")
def flip(volume: StructuredVolume, axis) -> None:
    """Reverse stored values along one axis (bit-exact permutation)."""
    a = _axis_index(axis)
    arr = volume.array()
    np_axis = 2 - a  # storage is (z, y, x)
    arr[...] = np.flip(arr, axis=np_axis).copy()


def _rotation_matrix(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(fvec3(axis, "rotation axis"), dtype=np.float64)
    norm = float(np.linalg.norm(k))
    if abs(norm - 1.0) > 1e-6:
        raise InvalidArgument(f"rotation axis must be unit length, |axis| = {norm}")
    k = k / norm
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    cross = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(k, k)


def _resample_in_place(volume: StructuredVolume, roi: Box3i, map_points) -> None:
    """Rewrite roi cells with samples of the snapshot at mapped positions."""
    roi = clip_box(roi if isinstance(roi, Box3i) else box3i(*roi), volume.bounds)
    if roi.is_empty:
        return
    snapshot = volume.mapped_array()  # fresh array, untouched by the writes below
    arr = volume.array()
    cell = np.asarray(volume.cell_size, dtype=np.float64)
    xs = (np.arange(roi.lower.x, roi.upper.x, dtype=np.float64) + 0.5) * cell[0]
    ys = (np.arange(roi.lower.y, roi.upper.y, dtype=np.float64) + 0.5) * cell[1]
    slabs = slab_ranges(roi.dims.z, min_thickness=1)

    def run_slab(block: int) -> None:
        z0, z1 = slabs[block]
        zs = (np.arange(roi.lower.z + z0, roi.lower.z + z1, dtype=np.float64) + 0.5) * cell[2]
        zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
        pts = np.stack([xx.reshape(-1), yy.reshape(-1), zz.reshape(-1)], axis=1)
        vals = sample_grid_linear(snapshot, cell, map_points(pts))
        arr[
            roi.lower.z + z0 : roi.lower.z + z1,
            roi.lower.y : roi.upper.y,
            roi.lower.x : roi.upper.x,
        ] = quantize(
            vals.reshape(z1 - z0, roi.dims.y, roi.dims.x), volume.format, volume.mapping
        )

    parallel_for(len(slabs), run_slab)


@timed("RotateRange")
def rotate_range(volume: StructuredVolume, roi, axis, angle_rad: float, center_world) -> None:
    """Rotate roi contents about `axis` through `center_world`.

    Each destination cell samples the snapshot at the inverse-rotated
    position, so the visible content turns by +angle.
    """
    rot = _rotation_matrix(axis, -float(angle_rad))
    center = np.asarray(fvec3(center_world, "rotation center"), dtype=np.float64)

    def map_points(pts: np.ndarray) -> np.ndarray:
        return (pts - center) @ rot.T + center

    _resample_in_place(volume, roi, map_points)


def rotate(volume: StructuredVolume, axis, angle_rad: float, center_world) -> None:
    rotate_range(volume, volume.bounds, axis, angle_rad, center_world)


@timed("ScaleRange")
def scale_range(volume: StructuredVolume, roi, factors, center_world) -> None:
    """Scale roi contents by `factors` about `center_world` (inverse mapped)."""
    f = np.asarray(fvec3(factors, "scale factors"), dtype=np.float64)
    if np.any(f <= 0):
        raise InvalidArgument(f"scale factors must be > 0, got {tuple(f)}")
    center = np.asarray(fvec3(center_world, "scale center"), dtype=np.float64)

    def map_points(pts: np.ndarray) -> np.ndarray:
        return (pts - center) / f + center

    _resample_in_place(volume, roi, map_points)


def scale(volume: StructuredVolume, factors, center_world) -> None:
    scale_range(volume, volume.bounds, factors, center_world)
