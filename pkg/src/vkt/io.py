"""Data sources, volume (de)serialization, and range-partial I/O.

File format (all multi-byte fields little-endian):

=========  =======================================================
offset     structured volume
=========  =======================================================
0          magic ``VKTVOL01`` (8 ASCII bytes)
8          volume type, u8: 0 = structured
9          dims, 3 x u32
21         format code, u8 (1 = u8, 2 = u16, 3 = f32)
22         cell size, 3 x f32
34         mapping lo, hi, 2 x f32
42         payload: raw cell bytes, x-fastest, then y, then z
=========  =======================================================

=========  =======================================================
offset     hierarchical volume
=========  =======================================================
0          magic ``VKTVOL01``
8          volume type, u8: 1 = hierarchical
9          mapping lo, hi, 2 x f32
17         subgrid count, u32
21         per subgrid: lower 3 x i32, dims 3 x u32, level u32
...        payload: f32 cell data per subgrid, header order
=========  =======================================================

Range reads and writes move one row of cells at a time so arbitrarily
large files never need a full load.
"""

from __future__ import annotations

import io as _io
import os
import struct
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from .errors import (
    BadMagic,
    EmptyRange,
    InvalidArgument,
    IoFailure,
    NotSeekable,
    RangeOutOfBounds,
    SizeMismatch,
    TruncatedPayload,
    UnknownFormatCode,
)
from .geom import Box3i, Vec3i, box3i, full_box, ivec3
from .hier import HierarchicalVolume, Subgrid
from .volume import DataFormat, StructuredVolume, VoxelMapping

MAGIC = b"VKTVOL01"
_STRUCTURED = 0
_HIERARCHICAL = 1

_STRUCT_HEADER = struct.Struct("<3IB3f2f")  # after magic + type byte
_HIER_HEADER = struct.Struct("<2fI")
_SUBGRID_META = struct.Struct("<3i3II")

STRUCTURED_HEADER_SIZE = len(MAGIC) + 1 + _STRUCT_HEADER.size  # 42 bytes


class DataSource:
    """Byte-level source/sink with read, write, seek, and flush."""

    def __init__(self, backing: Union[str, Path, bytes, bytearray, BinaryIO], mode: str = "r"):
        self._owns = False
        if isinstance(backing, (str, Path)):
            flags = {"r": "rb", "w": "w+b", "r+": "r+b"}.get(mode)
            if flags is None:
                raise InvalidArgument(f"unknown data source mode {mode!r}")
            try:
                self._stream: BinaryIO = open(backing, flags)
            except OSError as e:
                raise IoFailure(str(e)) from e
            self._owns = True
            self.readable = "+" in flags or "r" in flags
            self.writable = "+" in flags or "w" in flags
            self.seekable = True
        elif isinstance(backing, (bytes, bytearray)):
            self._stream = _io.BytesIO(bytes(backing))
            self.readable = True
            self.writable = mode != "r"
            self.seekable = True
        else:
            self._stream = backing
            self.readable = getattr(backing, "readable", lambda: True)()
            self.writable = getattr(backing, "writable", lambda: False)()
            self.seekable = getattr(backing, "seekable", lambda: False)()

    @classmethod
    def memory(cls, initial: bytes = b"") -> "DataSource":
        src = cls(_io.BytesIO(initial))
        src.readable = src.writable = src.seekable = True
        return src

    def read(self, n: int = -1) -> bytes:
        if not self.readable:
            raise IoFailure("data source is not readable")
        return self._stream.read(n)

    def write(self, data: bytes) -> int:
        if not self.writable:
            raise IoFailure("data source is not writable")
        return self._stream.write(data)

    def seek(self, offset: int) -> None:
        if not self.seekable:
            raise NotSeekable("data source does not support seeking")
        self._stream.seek(offset, os.SEEK_SET)

    def tell(self) -> int:
        return self._stream.tell()

    def flush(self) -> None:
        self._stream.flush()

    def size(self) -> Optional[int]:
        if not self.seekable:
            return None
        pos = self._stream.tell()
        self._stream.seek(0, os.SEEK_END)
        end = self._stream.tell()
        self._stream.seek(pos, os.SEEK_SET)
        return end

    def to_bytes(self) -> bytes:
        if isinstance(self._stream, _io.BytesIO):
            return self._stream.getvalue()
        raise InvalidArgument("to_bytes is only available for in-memory sources")

    def close(self) -> None:
        if self._owns:
            self._stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _as_source(src, mode: str) -> tuple[DataSource, bool]:
    if isinstance(src, DataSource):
        return src, False
    return DataSource(src, mode), True


def _read_exact(src: DataSource, n: int, what: str) -> bytes:
    data = src.read(n)
    if len(data) != n:
        raise TruncatedPayload(f"expected {n} bytes of {what}, got {len(data)}")
    return data


# -- whole-volume serialization ------------------------------------------


def write_volume(dst, volume) -> None:
    """Serialize a structured or hierarchical volume to `dst`."""
    src, owned = _as_source(dst, "w")
    try:
        if isinstance(volume, StructuredVolume):
            header = MAGIC + bytes([_STRUCTURED]) + _STRUCT_HEADER.pack(
                volume.dims.x, volume.dims.y, volume.dims.z,
                volume.format.value,
                volume.cell_size.x, volume.cell_size.y, volume.cell_size.z,
                volume.mapping.lo, volume.mapping.hi,
            )
            src.write(header)
            src.write(volume.array().tobytes())
        elif isinstance(volume, HierarchicalVolume):
            src.write(MAGIC + bytes([_HIERARCHICAL]))
            src.write(_HIER_HEADER.pack(volume.mapping.lo, volume.mapping.hi, volume.subgrid_count))
            for i in range(volume.subgrid_count):
                sg = volume.subgrid(i)
                src.write(_SUBGRID_META.pack(
                    sg.lower_logical.x, sg.lower_logical.y, sg.lower_logical.z,
                    sg.dims_cells.x, sg.dims_cells.y, sg.dims_cells.z,
                    sg.level,
                ))
            volume.data.migrate()
            src.write(volume.data.array.tobytes())
        else:
            raise InvalidArgument(f"cannot serialize {type(volume).__name__}")
        src.flush()
    finally:
        if owned:
            src.close()


def volume_to_bytes(volume) -> bytes:
    sink = DataSource.memory()
    write_volume(sink, volume)
    return sink.to_bytes()


def read_volume(src) -> Union[StructuredVolume, HierarchicalVolume]:
    """Materialize the volume starting at the source cursor."""
    source, owned = _as_source(src, "r")
    try:
        magic = _read_exact(source, len(MAGIC), "magic")
        if magic != MAGIC:
            raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
        vtype = _read_exact(source, 1, "volume type")[0]
        if vtype == _STRUCTURED:
            return _read_structured_after_header(source)
        if vtype == _HIERARCHICAL:
            return _read_hierarchical_after_header(source)
        raise UnknownFormatCode(f"unknown volume type {vtype}")
    finally:
        if owned:
            source.close()


def volume_from_bytes(payload: bytes):
    return read_volume(DataSource(payload))


def _read_structured_after_header(src: DataSource) -> StructuredVolume:
    fields = _STRUCT_HEADER.unpack(_read_exact(src, _STRUCT_HEADER.size, "structured header"))
    dx, dy, dz, code = fields[0], fields[1], fields[2], fields[3]
    cell_size = fields[4:7]
    mapping = VoxelMapping(fields[7], fields[8])
    fmt = DataFormat.from_code(code) if code in (1, 2, 3) else None
    if fmt is None:
        raise UnknownFormatCode(f"unknown data format code {code}")
    volume = StructuredVolume((dx, dy, dz), fmt, cell_size, mapping)
    payload = _read_exact(src, volume.data.byte_length, "cell payload")
    volume.fill_bytes(payload)
    return volume


def _read_hierarchical_after_header(src: DataSource) -> HierarchicalVolume:
    lo, hi, count = _HIER_HEADER.unpack(_read_exact(src, _HIER_HEADER.size, "hierarchical header"))
    metas = []
    for _ in range(count):
        vals = _SUBGRID_META.unpack(_read_exact(src, _SUBGRID_META.size, "subgrid meta"))
        metas.append((Vec3i(*vals[0:3]), Vec3i(*vals[3:6]), vals[6]))
    subgrids = []
    for lower, dims, level in metas:
        n = dims.x * dims.y * dims.z
        raw = _read_exact(src, n * 4, "subgrid payload")
        data = np.frombuffer(raw, dtype="<f4").reshape(dims.z, dims.y, dims.x)
        subgrids.append(Subgrid(level, lower, dims, data))
    return HierarchicalVolume(subgrids, VoxelMapping(lo, hi))


# -- headerless raw payloads ----------------------------------------------


def load_raw(src, dims, fmt: DataFormat, cell_size=(1.0, 1.0, 1.0), mapping=(0.0, 1.0)) -> StructuredVolume:
    """Wrap a headerless cell payload; its length must match exactly."""
    source, owned = _as_source(src, "r")
    try:
        dims = ivec3(dims, "dims")
        if not isinstance(fmt, DataFormat):
            fmt = DataFormat.parse(fmt)
        expected = dims.x * dims.y * dims.z * fmt.bytes_per_cell
        payload = source.read()
        if len(payload) != expected:
            raise SizeMismatch(
                f"raw payload holds {len(payload)} bytes, "
                f"{dims.x}x{dims.y}x{dims.z} {fmt.short_name} needs {expected}"
            )
        volume = StructuredVolume(dims, fmt, cell_size, mapping)
        volume.fill_bytes(payload)
        return volume
    finally:
        if owned:
            source.close()


# -- range-partial I/O -----------------------------------------------------


def _structured_header_geometry(src: DataSource):
    src.seek(0)
    magic = _read_exact(src, len(MAGIC), "magic")
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    vtype = _read_exact(src, 1, "volume type")[0]
    if vtype != _STRUCTURED:
        raise InvalidArgument("range I/O is defined for structured volumes only")
    fields = _STRUCT_HEADER.unpack(_read_exact(src, _STRUCT_HEADER.size, "structured header"))
    dims = Vec3i(fields[0], fields[1], fields[2])
    fmt = DataFormat.from_code(fields[3])
    cell_size = fields[4:7]
    mapping = VoxelMapping(fields[7], fields[8])
    return dims, fmt, cell_size, mapping


def read_range(src, roi: Box3i) -> StructuredVolume:
    """Read exactly the cells in `roi` using seek-based row reads."""
    source, owned = _as_source(src, "r")
    try:
        if not source.seekable:
            raise NotSeekable("range reads need a seekable source")
        dims, fmt, cell_size, mapping = _structured_header_geometry(source)
        roi = box3i(*roi) if not isinstance(roi, Box3i) else roi
        if roi.is_empty:
            raise EmptyRange(f"roi {roi} selects no cells")
        if not full_box(dims).contains_box(roi):
            raise RangeOutOfBounds(f"roi {roi} exceeds volume dims {tuple(dims)}")
        out = StructuredVolume(roi.dims, fmt, cell_size, mapping)
        dst = out.array()
        bpc = fmt.bytes_per_cell
        width = roi.dims.x
        x0, y0, z0 = roi.lower
        for k in range(roi.dims.z):
            for j in range(roi.dims.y):
                cell = x0 + dims.x * ((y0 + j) + dims.y * (z0 + k))
                source.seek(STRUCTURED_HEADER_SIZE + cell * bpc)
                row = _read_exact(source, width * bpc, "row")
                dst[k, j, :] = np.frombuffer(row, dtype=fmt.dtype)
        return out
    finally:
        if owned:
            source.close()


def write_range(dst, volume: StructuredVolume, first_cell) -> None:
    """Overwrite the sub-box starting at `first_cell` in an existing file."""
    source, owned = _as_source(dst, "r+")
    try:
        if not source.seekable:
            raise NotSeekable("range writes need a seekable destination")
        if not source.writable:
            raise IoFailure("range writes need a writable destination")
        dims, fmt, _, _ = _structured_header_geometry(source)
        first = ivec3(first_cell, "first cell")
        if volume.format is not fmt:
            raise InvalidArgument(
                f"volume format {volume.format.short_name} differs from file format {fmt.short_name}"
            )
        end = Vec3i(first.x + volume.dims.x, first.y + volume.dims.y, first.z + volume.dims.z)
        if min(first) < 0 or not full_box(dims).contains_box(Box3i(first, end)):
            raise RangeOutOfBounds(
                f"sub-box at {tuple(first)} with dims {tuple(volume.dims)} "
                f"exceeds file dims {tuple(dims)}"
            )
        src_arr = volume.array()
        bpc = fmt.bytes_per_cell
        for k in range(volume.dims.z):
            for j in range(volume.dims.y):
                cell = first.x + dims.x * ((first.y + j) + dims.y * (first.z + k))
                source.seek(STRUCTURED_HEADER_SIZE + cell * bpc)
                source.write(src_arr[k, j, :].tobytes())
        source.flush()
    finally:
        if owned:
            source.close()
