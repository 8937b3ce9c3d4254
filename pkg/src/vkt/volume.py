"""Structured volumes, voxel value mapping, and trilinear sampling.

A structured volume is a dense grid of cells laid out x-fastest
(linear index ``i + dims.x * (j + dims.y * k)``), stored little-endian
in a managed buffer.  Integer formats quantize application values into
the volume's voxel mapping range ``[lo, hi]``; Float32 stores values
verbatim and uses the mapping only when consumers need normalized
values (lookup tables, histograms, contrast equalization, rendering).

Sample positions are cell-centered: cell ``(i, j, k)`` spans world
``[i, i+1) * cell_size`` per axis with its sample at ``(i + 0.5) *
cell_size``.  Out-of-range sample coordinates clamp to the boundary
cell centers (clamp-to-edge).
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .errors import IndexOutOfRange, InvalidArgument
from .geom import Box3i, Vec3f, Vec3i, full_box, fvec3, ivec3
from .managed import ManagedBuffer, registry


class DataFormat(Enum):
    UINT8 = 1
    UINT16 = 2
    FLOAT32 = 3

    @property
    def bytes_per_cell(self) -> int:
        return {DataFormat.UINT8: 1, DataFormat.UINT16: 2, DataFormat.FLOAT32: 4}[self]

    @property
    def dtype(self) -> np.dtype:
        return {
            DataFormat.UINT8: np.dtype("<u1"),
            DataFormat.UINT16: np.dtype("<u2"),
            DataFormat.FLOAT32: np.dtype("<f4"),
        }[self]

    @property
    def max_int(self) -> Optional[int]:
        """Largest stored integer, or None for float storage."""
        return {DataFormat.UINT8: 255, DataFormat.UINT16: 65535, DataFormat.FLOAT32: None}[self]

    @classmethod
    def from_code(cls, code: int) -> "DataFormat":
        for fmt in cls:
            if fmt.value == code:
                return fmt
        raise InvalidArgument(f"unknown data format code {code}")

    @classmethod
    def parse(cls, name: str) -> "DataFormat":
        table = {"u8": cls.UINT8, "uint8": cls.UINT8,
                 "u16": cls.UINT16, "uint16": cls.UINT16,
                 "f32": cls.FLOAT32, "float32": cls.FLOAT32}
        key = name.strip().lower()
        if key not in table:
            raise InvalidArgument(f"unknown data format {name!r}")
        return table[key]

    @property
    def short_name(self) -> str:
        return {DataFormat.UINT8: "u8", DataFormat.UINT16: "u16", DataFormat.FLOAT32: "f32"}[self]


class VoxelMapping:
    """Linear map between stored values and application values [lo, hi]."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise InvalidArgument(f"voxel mapping needs finite lo < hi, got [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    def __iter__(self):
        return iter((self.lo, self.hi))

    def __eq__(self, other):
        return isinstance(other, VoxelMapping) and (self.lo, self.hi) == (other.lo, other.hi)

    def __repr__(self):
        return f"VoxelMapping({self.lo}, {self.hi})"

    @classmethod
    def coerce(cls, value) -> "VoxelMapping":
        if isinstance(value, VoxelMapping):
            return value
        lo, hi = value
        return cls(lo, hi)


def quantize(values: np.ndarray, fmt: DataFormat, mapping: VoxelMapping) -> np.ndarray:
    """Application values -> stored values (round half away from zero)."""
    values = np.asarray(values, dtype=np.float64)
    if fmt is DataFormat.FLOAT32:
        return values.astype("<f4")
    max_int = fmt.max_int
    t = np.clip((values - mapping.lo) / (mapping.hi - mapping.lo), 0.0, 1.0)
    # t is non-negative, so half away from zero == floor(x + 0.5).
    return np.floor(t * max_int + 0.5).astype(fmt.dtype)


def dequantize(stored: np.ndarray, fmt: DataFormat, mapping: VoxelMapping) -> np.ndarray:
    """Stored values -> application values as float64."""
    if fmt is DataFormat.FLOAT32:
        return np.asarray(stored, dtype=np.float64)
    arr = np.asarray(stored, dtype=np.float64)
    return mapping.lo + (arr / fmt.max_int) * (mapping.hi - mapping.lo)


class StructuredVolume:
    """Dense 3D cell grid with data format, cell size, and voxel mapping."""

    def __init__(
        self,
        dims: Iterable[int],
        fmt: DataFormat,
        cell_size: Iterable[float] = (1.0, 1.0, 1.0),
        mapping=(0.0, 1.0),
        data: Optional[ManagedBuffer] = None,
    ):
        self.dims = ivec3(dims, "dims")
        if min(self.dims) < 1:
            raise InvalidArgument(f"dims must be >= 1 per axis, got {tuple(self.dims)}")
        if not isinstance(fmt, DataFormat):
            fmt = DataFormat.parse(fmt)
        self.format = fmt
        self.cell_size = fvec3(cell_size, "cell size")
        if min(self.cell_size) <= 0:
            raise InvalidArgument(f"cell size must be > 0 per axis, got {tuple(self.cell_size)}")
        self.mapping = VoxelMapping.coerce(mapping)
        nbytes = self.dims.x * self.dims.y * self.dims.z * fmt.bytes_per_cell
        if data is None:
            data = ManagedBuffer(nbytes)
        elif data.byte_length != nbytes:
            raise InvalidArgument(
                f"buffer holds {data.byte_length} bytes, volume needs {nbytes}"
            )
        self.data = data
        self.resource_handle = registry.register(self)

    # -- geometry -----------------------------------------------------

    @property
    def cell_count(self) -> int:
        return self.dims.x * self.dims.y * self.dims.z

    @property
    def world_extent(self) -> Vec3f:
        return Vec3f(
            self.dims.x * self.cell_size.x,
            self.dims.y * self.cell_size.y,
            self.dims.z * self.cell_size.z,
        )

    @property
    def bounds(self) -> Box3i:
        return full_box(self.dims)

    # -- storage access -----------------------------------------------

    def array(self) -> np.ndarray:
        """Stored-value view shaped (z, y, x), after migrating."""
        self.data.migrate()
        return self.data.array.view(self.format.dtype).reshape(
            self.dims.z, self.dims.y, self.dims.x
        )

    def mapped_array(self) -> np.ndarray:
        """Application values (float64) shaped (z, y, x)."""
        return dequantize(self.array(), self.format, self.mapping)

    def normalized_array(self) -> np.ndarray:
        """Mapping-normalized values t in [0, 1], shaped (z, y, x)."""
        m = self.mapped_array()
        return np.clip((m - self.mapping.lo) / (self.mapping.hi - self.mapping.lo), 0.0, 1.0)

    def _check_index(self, idx) -> Vec3i:
        idx = ivec3(idx, "cell index")
        if not (0 <= idx.x < self.dims.x and 0 <= idx.y < self.dims.y and 0 <= idx.z < self.dims.z):
            raise IndexOutOfRange(f"index {tuple(idx)} outside dims {tuple(self.dims)}")
        return idx

    def get_value(self, idx) -> float:
        idx = self._check_index(idx)
        stored = self.array()[idx.z, idx.y, idx.x]
        return float(dequantize(stored, self.format, self.mapping))

    def set_value(self, idx, value: float) -> None:
        idx = self._check_index(idx)
        self.array()[idx.z, idx.y, idx.x] = quantize(value, self.format, self.mapping)

    def fill_bytes(self, raw: bytes) -> None:
        if len(raw) != self.data.byte_length:
            raise InvalidArgument(
                f"payload holds {len(raw)} bytes, volume needs {self.data.byte_length}"
            )
        self.data.migrate()
        self.data.array[:] = np.frombuffer(raw, dtype=np.uint8)

    def copy(self) -> "StructuredVolume":
        out = StructuredVolume(self.dims, self.format, self.cell_size, self.mapping)
        out.data.migrate()
        self.data.migrate()
        out.data.array[:] = self.data.array
        return out

    # -- sampling -----------------------------------------------------

    def sample_linear(self, p) -> float:
        """Trilinear sample of mapped values at world position p."""
        pts = np.asarray(fvec3(p, "sample position"), dtype=np.float64).reshape(1, 3)
        return float(self.sample_linear_many(pts)[0])

    def sample_linear_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized trilinear sampling; points is (n, 3) world (x, y, z)."""
        return sample_grid_linear(self.mapped_array(), np.asarray(self.cell_size), points)

    def __repr__(self):
        d = self.dims
        return (
            f"StructuredVolume({d.x}x{d.y}x{d.z}, {self.format.short_name}, "
            f"range [{self.mapping.lo}, {self.mapping.hi}])"
        )


def sample_grid_linear(grid: np.ndarray, cell_size: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation on a (z, y, x) grid of mapped values.

    Samples live at cell centers ``(i + 0.5) * cell_size``; coordinates
    clamp to the valid center lattice so edge values extend outward.
    """
    pts = np.asarray(points, dtype=np.float64)
    nz, ny, nx = grid.shape
    dims = np.array([nx, ny, nz], dtype=np.float64)
    u = pts / np.asarray(cell_size, dtype=np.float64) - 0.5
    u = np.clip(u, 0.0, dims - 1.0)
    i0 = np.floor(u).astype(np.int64)
    i0 = np.minimum(i0, np.maximum(dims.astype(np.int64) - 2, 0))
    f = u - i0
    i1 = np.minimum(i0 + 1, dims.astype(np.int64) - 1)

    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    x1, y1, z1 = i1[:, 0], i1[:, 1], i1[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]

    def lerp(a, b, t):
        return a + t * (b - a)

    c00 = lerp(grid[z0, y0, x0], grid[z0, y0, x1], fx)
    c10 = lerp(grid[z0, y1, x0], grid[z0, y1, x1], fx)
    c01 = lerp(grid[z1, y0, x0], grid[z1, y0, x1], fx)
    c11 = lerp(grid[z1, y1, x0], grid[z1, y1, x1], fx)
    c0 = lerp(c00, c10, fy)
    c1 = lerp(c01, c11, fy)
    return lerp(c0, c1, fz)


def create_structured_volume(dims, fmt, cell_size=(1.0, 1.0, 1.0), mapping=(0.0, 1.0)) -> StructuredVolume:
    """Allocate a zero-filled structured volume in the current device space."""
    return StructuredVolume(dims, fmt, cell_size, mapping)


class LookupTable:
    """RGBA32F transfer-function table of shape (n, 1, 1)."""

    def __init__(self, dims, data: Optional[np.ndarray] = None):
        if isinstance(dims, int):
            dims = (dims, 1, 1)
        dims = ivec3(dims, "lut dims")
        if dims.y != 1 or dims.z != 1 or dims.x < 1:
            raise InvalidArgument(f"lookup tables must be (n, 1, 1) with n >= 1, got {tuple(dims)}")
        self.dims = dims
        self.data = ManagedBuffer(dims.x * 4 * 4)
        self.resource_handle = registry.register(self)
        if data is not None:
            self.set_data(data)

    @property
    def size(self) -> int:
        return self.dims.x

    def set_data(self, rgba) -> None:
        arr = np.asarray(rgba, dtype="<f4").reshape(-1)
        if arr.size != self.dims.x * 4:
            raise InvalidArgument(
                f"lookup table needs {self.dims.x * 4} floats, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument("lookup table entries must be finite")
        self.data.migrate()
        self.data.array[:] = arr.view(np.uint8)

    def table(self) -> np.ndarray:
        """(n, 4) float32 view of the RGBA tuples, after migrating."""
        self.data.migrate()
        return self.data.array.view("<f4").reshape(self.dims.x, 4)

    def classify(self, t: float) -> tuple[float, float, float, float]:
        """Piecewise-linear RGBA lookup of a normalized scalar."""
        out = self.classify_many(np.asarray([t], dtype=np.float64))[0]
        return tuple(float(c) for c in out)

    def classify_many(self, t: np.ndarray) -> np.ndarray:
        table = self.table().astype(np.float64)
        n = self.dims.x
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        if n == 1:
            return np.broadcast_to(table[0], t.shape + (4,)).copy()
        pos = t * (n - 1)
        i0 = np.minimum(np.floor(pos).astype(np.int64), n - 2)
        f = (pos - i0)[..., None]
        return table[i0] + f * (table[i0 + 1] - table[i0])
