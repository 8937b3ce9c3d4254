"""Small integer/float vector and box helpers shared across the toolkit.

Vectors are plain named tuples so they unpack and compare like the
``(x, y, z)`` tuples users pass in; every public entry point normalizes
its arguments through :func:`ivec3` / :func:`fvec3` / :func:`box3i`.
Boxes are half-open: ``lower`` inclusive, ``upper`` exclusive.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

from .errors import InvalidArgument


class Vec3i(NamedTuple):
    x: int
    y: int
    z: int


class Vec3f(NamedTuple):
    x: float
    y: float
    z: float


class Box3i(NamedTuple):
    lower: Vec3i
    upper: Vec3i

    @property
    def dims(self) -> Vec3i:
        return Vec3i(
            self.upper.x - self.lower.x,
            self.upper.y - self.lower.y,
            self.upper.z - self.lower.z,
        )

    @property
    def is_empty(self) -> bool:
        return (
            self.upper.x <= self.lower.x
            or self.upper.y <= self.lower.y
            or self.upper.z <= self.lower.z
        )

    @property
    def cell_count(self) -> int:
        if self.is_empty:
            return 0
        d = self.dims
        return d.x * d.y * d.z

    def contains_box(self, other: "Box3i") -> bool:
        if other.is_empty:
            return True
        return all(
            self.lower[a] <= other.lower[a] and other.upper[a] <= self.upper[a]
            for a in range(3)
        )


def ivec3(v: Iterable[int] | int, name: str = "vector") -> Vec3i:
    if isinstance(v, int):
        return Vec3i(v, v, v)
    parts = tuple(v)
    if len(parts) != 3:
        raise InvalidArgument(f"{name} needs exactly 3 components, got {len(parts)}")
    out = []
    for p in parts:
        q = int(p)
        if q != p:
            raise InvalidArgument(f"{name} component {p!r} is not an integer")
        out.append(q)
    return Vec3i(*out)


def fvec3(v: Iterable[float] | float, name: str = "vector") -> Vec3f:
    if isinstance(v, (int, float)):
        v = (v, v, v)
    parts = tuple(float(p) for p in v)
    if len(parts) != 3:
        raise InvalidArgument(f"{name} needs exactly 3 components, got {len(parts)}")
    if not all(math.isfinite(p) for p in parts):
        raise InvalidArgument(f"{name} components must be finite, got {parts}")
    return Vec3f(*parts)


def box3i(lower: Iterable[int], upper: Iterable[int]) -> Box3i:
    return Box3i(ivec3(lower, "box lower"), ivec3(upper, "box upper"))


def full_box(dims: Iterable[int]) -> Box3i:
    return Box3i(Vec3i(0, 0, 0), ivec3(dims, "dims"))


def clip_box(box: Box3i, bounds: Box3i) -> Box3i:
    """Intersection of two boxes; may be empty."""
    lo = Vec3i(*(max(box.lower[a], bounds.lower[a]) for a in range(3)))
    hi = Vec3i(*(min(box.upper[a], bounds.upper[a]) for a in range(3)))
    return Box3i(lo, hi)
