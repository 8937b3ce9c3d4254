"""Linear RGBA images and PPM/PFM file output.

PPM (P6) stores gamma-2.2 encoded 8-bit RGB; PFM stores the raw linear
float32 RGB rows bottom-up with a little-endian scale marker.  Alpha is
dropped by both formats.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgument, IoFailure


class ImageRGBA:
    """Row-major, top-left origin, linear float32 RGBA samples."""

    def __init__(self, width: int, height: int, data: np.ndarray | None = None):
        if width < 1 or height < 1:
            raise InvalidArgument(f"image size must be >= 1x1, got {width}x{height}")
        self.width = width
        self.height = height
        if data is None:
            data = np.zeros((height, width, 4), dtype=np.float32)
        self.data = np.asarray(data, dtype=np.float32).reshape(height, width, 4)

    def __eq__(self, other):
        return (
            isinstance(other, ImageRGBA)
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )


def encode_ppm(img: ImageRGBA) -> bytes:
    rgb = np.clip(img.data[..., :3].astype(np.float64), 0.0, 1.0)
    encoded = np.floor(255.0 * rgb ** (1.0 / 2.2) + 0.5).astype(np.uint8)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + encoded.tobytes()


def encode_pfm(img: ImageRGBA) -> bytes:
    header = f"PF\n{img.width} {img.height}\n-1.0\n".encode("ascii")
    rgb = img.data[..., :3].astype("<f4")
    return header + rgb[::-1].tobytes()  # rows bottom-up


def decode_pfm(payload: bytes) -> ImageRGBA:
    parts = payload.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"PF":
        raise InvalidArgument("not a binary PFM color image")
    w, h = (int(v) for v in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    rgb = np.frombuffer(parts[3][: w * h * 12], dtype=dtype).reshape(h, w, 3)[::-1]
    data = np.concatenate([rgb, np.ones((h, w, 1), dtype=np.float32)], axis=2)
    return ImageRGBA(w, h, data)


def write_image(img: ImageRGBA, path, image_format: str | None = None) -> None:
    """Write `img` as PPM or PFM (chosen by extension unless given)."""
    path = Path(path)
    fmt = (image_format or path.suffix.lstrip(".")).lower()
    if fmt == "ppm":
        payload = encode_ppm(img)
    elif fmt == "pfm":
        payload = encode_pfm(img)
    else:
        raise InvalidArgument(f"unknown image format {fmt!r} (use ppm or pfm)")
    try:
        path.write_bytes(payload)
    except OSError as e:
        raise IoFailure(str(e)) from e
