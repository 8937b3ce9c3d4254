"""Convolution filtering and contrast-limited adaptive histogram equalization.

``apply_filter`` correlates the volume with a user kernel in mapped
value space against an immutable snapshot, clamping reads at the
boundary.  ``clahe_equalize`` partitions the volume into bricks,
equalizes each brick's histogram with an optional contrast clip, and
blends the per-brick mappings trilinearly between brick centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EvenKernelDims, InvalidArgument
from ..execution import map_blocks, parallel_for, slab_ranges, timed
from ..geom import Vec3i, ivec3
from ..volume import StructuredVolume, quantize


@dataclass
class Kernel:
    """Dense correlation kernel; extent must be odd on every axis."""

    dims: Vec3i
    weights: np.ndarray = field(repr=False)

    def __init__(self, dims, weights):
        self.dims = ivec3(dims, "kernel dims")
        if any(d % 2 == 0 or d < 1 for d in self.dims):
            raise EvenKernelDims(f"kernel dims must be odd, got {tuple(self.dims)}")
        w = np.asarray(weights, dtype=np.float64).reshape(
            self.dims.z, self.dims.y, self.dims.x
        )
        if not np.all(np.isfinite(w)):
            raise InvalidArgument("kernel weights must be finite")
        self.weights = w

    @property
    def radius(self) -> Vec3i:
        return Vec3i(self.dims.x // 2, self.dims.y // 2, self.dims.z // 2)


def gaussian_kernel(sigma: float, size: int | None = None) -> Kernel:
    """Normalized isotropic 3D Gaussian; default extent covers 2 sigma."""
    if sigma <= 0:
        raise InvalidArgument(f"sigma must be > 0, got {sigma}")
    if size is None:
        size = 2 * int(math.ceil(2.0 * sigma)) + 1
    if size % 2 == 0:
        raise EvenKernelDims(f"kernel size must be odd, got {size}")
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (x / sigma) ** 2)
    k = g1[:, None, None] * g1[None, :, None] * g1[None, None, :]
    k /= k.sum()
    return Kernel((size, size, size), k)


def box_kernel(size: int) -> Kernel:
    if size % 2 == 0:
        raise EvenKernelDims(f"kernel size must be odd, got {size}")
    k = np.full((size, size, size), 1.0 / size**3)
    return Kernel((size, size, size), k)


@timed("ApplyFilter")
def apply_filter(volume: StructuredVolume, kernel: Kernel) -> None:
    """Correlate the volume with `kernel` in mapped value space.

    out(c) = sum_o k(o) * in(c + o - radius), with clamp-to-edge reads;
    the result is re-quantized into the volume's format.
    """
    r = kernel.radius
    snapshot = volume.mapped_array()
    padded = np.pad(snapshot, ((r.z, r.z), (r.y, r.y), (r.x, r.x)), mode="edge")
    arr = volume.array()
    nz, ny, nx = snapshot.shape
    w = kernel.weights
    slabs = slab_ranges(nz)

    def run_slab(block: int) -> None:
        z0, z1 = slabs[block]
        acc = np.zeros((z1 - z0, ny, nx), dtype=np.float64)
        # fixed tap order (z, y, x) keeps per-cell sums identical across
        # any slab decomposition
        for dz in range(kernel.dims.z):
            for dy in range(kernel.dims.y):
                for dx in range(kernel.dims.x):
                    acc += w[dz, dy, dx] * padded[z0 + dz : z1 + dz, dy : dy + ny, dx : dx + nx]
        arr[z0:z1] = quantize(acc, volume.format, volume.mapping)

    parallel_for(len(slabs), run_slab)


# -- CLAHE ---------------------------------------------------------------


@dataclass
class ClaheParams:
    """Brick grid, histogram resolution, and contrast clip factor.

    clip_limit is a multiple of the uniform bin height; math.inf
    disables clipping entirely.
    """

    brick_counts: Vec3i
    num_bins: int = 256
    clip_limit: float = math.inf

    def __post_init__(self):
        self.brick_counts = ivec3(self.brick_counts, "brick counts")


def _axis_edges(extent: int, count: int) -> np.ndarray:
    """Split `extent` cells into `count` bricks, remainder to the front."""
    base, rem = divmod(extent, count)
    sizes = [base + (1 if i < rem else 0) for i in range(count)]
    return np.cumsum([0] + sizes)


def _clip_counts(hist: np.ndarray, limit: int) -> np.ndarray:
    """Single-pass clip: pooled excess returns evenly, remainder to bins 0..r-1."""
    excess = int(np.sum(np.maximum(hist - limit, 0)))
    clipped = np.minimum(hist, limit)
    share, rem = divmod(excess, hist.size)
    clipped = clipped + share
    clipped[:rem] += 1
    return clipped


def _blend_coords(extent: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (lower brick index, blend weight) along one axis.

    Cells beyond the first/last brick centers clamp to the edge brick.
    """
    centers = (edges[:-1] + edges[1:]) / 2.0
    x = np.arange(extent, dtype=np.float64) + 0.5
    if len(centers) == 1:
        return np.zeros(extent, dtype=np.int64), np.zeros(extent)
    lo = np.clip(np.searchsorted(centers, x, side="right") - 1, 0, len(centers) - 2)
    w = (x - centers[lo]) / (centers[lo + 1] - centers[lo])
    return lo, np.clip(w, 0.0, 1.0)


def _validate_params(volume: StructuredVolume, params: ClaheParams) -> None:
    if params.num_bins < 2:
        raise InvalidArgument(f"CLAHE needs num_bins >= 2, got {params.num_bins}")
    counts = params.brick_counts
    if min(counts) < 1 or any(counts[a] > volume.dims[a] for a in range(3)):
        raise InvalidArgument(
            f"brick counts {tuple(counts)} invalid for dims {tuple(volume.dims)}"
        )
    if not (params.clip_limit >= 1.0):
        raise InvalidArgument(f"clip limit must be >= 1 (or inf), got {params.clip_limit}")


def brick_mappings(volume: StructuredVolume, params: ClaheParams) -> np.ndarray:
    """Per-brick equalization maps, shape (bz, by, bx, num_bins).

    Each map is a clipped-histogram cdf divided by the brick cell count
    and is therefore monotone non-decreasing with final value 1.
    """
    _validate_params(volume, params)
    counts = params.brick_counts
    nbins = params.num_bins
    t = volume.normalized_array()
    bins = np.minimum(nbins - 1, np.floor(t * nbins)).astype(np.int64)
    ex = _axis_edges(volume.dims.x, counts.x)
    ey = _axis_edges(volume.dims.y, counts.y)
    ez = _axis_edges(volume.dims.z, counts.z)
    bricks = [
        (bz, by, bx)
        for bz in range(counts.z)
        for by in range(counts.y)
        for bx in range(counts.x)
    ]

    def brick_mapping(i: int) -> np.ndarray:
        bz, by, bx = bricks[i]
        sel = bins[ez[bz] : ez[bz + 1], ey[by] : ey[by + 1], ex[bx] : ex[bx + 1]]
        hist = np.bincount(sel.reshape(-1), minlength=nbins).astype(np.int64)
        n_cells = int(sel.size)
        if math.isfinite(params.clip_limit):
            limit = max(1, int(math.floor(params.clip_limit * n_cells / nbins + 0.5)))
            hist = _clip_counts(hist, limit)
        return np.cumsum(hist) / float(n_cells)

    return np.array(map_blocks(len(bricks), brick_mapping)).reshape(
        counts.z, counts.y, counts.x, nbins
    )


@timed("ClaheEqualize")
def clahe_equalize(volume: StructuredVolume, params: ClaheParams) -> None:
    """Adaptive histogram equalization over normalized values.

    Bricks partition the index box; each brick's clipped histogram
    yields a monotone cdf mapping, and each cell blends the mappings of
    its 8 nearest brick centers.
    """
    _validate_params(volume, params)
    counts = params.brick_counts
    nbins = params.num_bins
    t = volume.normalized_array()
    bins = np.minimum(nbins - 1, np.floor(t * nbins)).astype(np.int64)

    ex = _axis_edges(volume.dims.x, counts.x)
    ey = _axis_edges(volume.dims.y, counts.y)
    ez = _axis_edges(volume.dims.z, counts.z)
    mappings = brick_mappings(volume, params)

    bx_lo, wx = _blend_coords(volume.dims.x, ex)
    by_lo, wy = _blend_coords(volume.dims.y, ey)
    bz_lo, wz = _blend_coords(volume.dims.z, ez)
    bx_hi = np.minimum(bx_lo + 1, counts.x - 1)
    by_hi = np.minimum(by_lo + 1, counts.y - 1)
    bz_hi = np.minimum(bz_lo + 1, counts.z - 1)

    arr = volume.array()
    lo_map, hi_map = volume.mapping.lo, volume.mapping.hi
    slabs = slab_ranges(volume.dims.z)

    def run_slab(block: int) -> None:
        z0, z1 = slabs[block]
        k = bins[z0:z1]
        zsel_lo = bz_lo[z0:z1][:, None, None]
        zsel_hi = bz_hi[z0:z1][:, None, None]
        ysel_lo = by_lo[None, :, None]
        ysel_hi = by_hi[None, :, None]
        xsel_lo = bx_lo[None, None, :]
        xsel_hi = bx_hi[None, None, :]
        fz = wz[z0:z1][:, None, None]
        fy = wy[None, :, None]
        fx = wx[None, None, :]
        out = np.zeros_like(k, dtype=np.float64)
        for zsel, gz in ((zsel_lo, 1.0 - fz), (zsel_hi, fz)):
            for ysel, gy in ((ysel_lo, 1.0 - fy), (ysel_hi, fy)):
                for xsel, gx in ((xsel_lo, 1.0 - fx), (xsel_hi, fx)):
                    out += gz * gy * gx * mappings[zsel, ysel, xsel, k]
        arr[z0:z1] = quantize(lo_map + out * (hi_map - lo_map), volume.format, volume.mapping)

    parallel_for(len(slabs), run_slab)
