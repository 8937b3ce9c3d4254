"""Hierarchical (multi-level subgrid) volumes and basis-interpolated sampling.

A hierarchical volume is a flat list of dense subgrids, each living on
a refinement level.  A level-``l`` cell is ``2**l`` logical units wide,
so the *logical grid* - the hypothetical uniform grid fine enough to
hold every subgrid losslessly - has dimensions ``max(lower + dims *
2**level)`` over all subgrids.  Regions of interest for range
algorithms are expressed in logical-grid coordinates.

Point sampling blends the hat (tent) functions of every cell whose
support covers the point, across all subgrids, normalized by the total
hat weight.  A subgrid's *active region* (its logical box grown by half
a cell width on every face) bounds the support of all its hats; a BVH
over the active regions accelerates the per-point subgrid lookup.
Contributions accumulate in ascending subgrid order so results do not
depend on traversal or scheduling.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyVolume, InvalidArgument
from .geom import Vec3i, ivec3
from .managed import ManagedBuffer, registry
from .volume import VoxelMapping

#: Subgrids per BVH leaf.
LEAF_SIZE = 4


@dataclass
class Subgrid:
    """A dense block of cells at one refinement level."""

    level: int
    lower_logical: Vec3i
    dims_cells: Vec3i
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lower_logical = ivec3(self.lower_logical, "subgrid lower")
        self.dims_cells = ivec3(self.dims_cells, "subgrid dims")
        if self.level < 0:
            raise InvalidArgument(f"subgrid level must be >= 0, got {self.level}")
        if min(self.dims_cells) < 1:
            raise InvalidArgument(f"subgrid dims must be >= 1, got {tuple(self.dims_cells)}")
        d = self.dims_cells
        if self.data is None:
            self.data = np.zeros((d.z, d.y, d.x), dtype="<f4")
        else:
            self.data = np.asarray(self.data, dtype="<f4").reshape(d.z, d.y, d.x)

    @property
    def cell_width(self) -> int:
        """Cell extent in logical units at this level."""
        return 1 << self.level

    @property
    def cell_count(self) -> int:
        d = self.dims_cells
        return d.x * d.y * d.z

    @property
    def logical_upper(self) -> Vec3i:
        w = self.cell_width
        return Vec3i(
            self.lower_logical.x + self.dims_cells.x * w,
            self.lower_logical.y + self.dims_cells.y * w,
            self.lower_logical.z + self.dims_cells.z * w,
        )

    def validate_alignment(self) -> None:
        w = self.cell_width
        if any(c % w != 0 for c in self.lower_logical):
            raise InvalidArgument(
                f"subgrid lower {tuple(self.lower_logical)} is not aligned to "
                f"level-{self.level} cell width {w}"
            )
        if min(self.lower_logical) < 0:
            raise InvalidArgument(
                f"subgrid lower {tuple(self.lower_logical)} must be non-negative"
            )


def active_brick_region(sg: Subgrid) -> tuple[np.ndarray, np.ndarray]:
    """Support box of the subgrid's hat functions: logical box grown by w/2."""
    w = sg.cell_width
    lo = np.array(sg.lower_logical, dtype=np.float64) - 0.5 * w
    hi = np.array(sg.logical_upper, dtype=np.float64) + 0.5 * w
    return lo, hi


@dataclass
class BvhNode:
    box_lo: np.ndarray
    box_hi: np.ndarray
    left: Optional["BvhNode"] = None
    right: Optional["BvhNode"] = None
    indices: Optional[list[int]] = field(default=None)

    @property
    def is_leaf(self) -> bool:
        return self.indices is not None


class Bvh:
    """Median-split BVH over subgrid active regions."""

    def __init__(self, root: BvhNode, regions: list[tuple[np.ndarray, np.ndarray]]):
        self.root = root
        self._regions = regions

    def query_point(self, p: np.ndarray) -> list[int]:
        """Indices of subgrids whose active region contains p (unsorted)."""
        p = np.asarray(p, dtype=np.float64)
        out: list[int] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if np.any(p < node.box_lo) or np.any(p > node.box_hi):
                continue
            if node.is_leaf:
                for i in node.indices:
                    lo, hi = self._regions[i]
                    if np.all(p >= lo) and np.all(p <= hi):
                        out.append(i)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out


def build_bvh(volume: "HierarchicalVolume") -> Bvh:
    """Recursive longest-axis median split, ties broken x then y then z."""
    n = volume.subgrid_count
    if n == 0:
        raise EmptyVolume("cannot build a BVH over zero subgrids")
    regions = [active_brick_region(volume.subgrid(i)) for i in range(n)]
    centroids = np.array([(lo + hi) * 0.5 for lo, hi in regions])

    def union_box(idxs: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        lo = np.min([regions[i][0] for i in idxs], axis=0)
        hi = np.max([regions[i][1] for i in idxs], axis=0)
        return lo, hi

    def build(idxs: list[int]) -> BvhNode:
        lo, hi = union_box(idxs)
        if len(idxs) <= LEAF_SIZE:
            return BvhNode(lo, hi, indices=sorted(idxs))
        cmin = centroids[idxs].min(axis=0)
        cmax = centroids[idxs].max(axis=0)
        axis = int(np.argmax(cmax - cmin))  # argmax takes the first max: x, y, z
        order = sorted(idxs, key=lambda i: (centroids[i][axis], i))
        mid = len(order) // 2
        return BvhNode(lo, hi, left=build(order[:mid]), right=build(order[mid:]))

    return Bvh(build(list(range(n))), regions)


class HierarchicalVolume:
    """List of leveled subgrids over a logical grid, sampled by hat blending."""

    def __init__(
        self,
        subgrids: Iterable[Subgrid],
        mapping=(0.0, 1.0),
        logical_dims=None,
        _validate: bool = True,
    ):
        subgrids = list(subgrids)
        if _validate:
            for sg in subgrids:
                sg.validate_alignment()
        self.mapping = VoxelMapping.coerce(mapping)
        self._meta = [
            (sg.level, sg.lower_logical, sg.dims_cells) for sg in subgrids
        ]
        self._offsets = np.cumsum([0] + [sg.cell_count for sg in subgrids])
        payload = ManagedBuffer(int(self._offsets[-1]) * 4)
        payload.migrate()
        flat = payload.array.view("<f4")
        for sg, off in zip(subgrids, self._offsets[:-1]):
            flat[off : off + sg.cell_count] = sg.data.reshape(-1)
        self.data = payload
        if logical_dims is not None:
            self.logical_dims = ivec3(logical_dims, "logical dims")
        elif subgrids:
            ups = np.array([sg.logical_upper for sg in subgrids], dtype=np.int64)
            self.logical_dims = Vec3i(*(int(v) for v in ups.max(axis=0)))
        else:
            self.logical_dims = Vec3i(0, 0, 0)
        self._bvh: Optional[Bvh] = None
        self._bvh_lock = threading.Lock()
        self.resource_handle = registry.register(self)

    # -- structure ------------------------------------------------------

    @property
    def subgrid_count(self) -> int:
        return len(self._meta)

    @property
    def cell_count(self) -> int:
        return int(self._offsets[-1])

    def subgrid_data(self, i: int) -> np.ndarray:
        """(z, y, x) float32 view into the packed payload, after migrating."""
        level, lower, dims = self._meta[i]
        self.data.migrate()
        flat = self.data.array.view("<f4")
        return flat[self._offsets[i] : self._offsets[i + 1]].reshape(dims.z, dims.y, dims.x)

    def subgrid(self, i: int) -> Subgrid:
        """Subgrid i; its data aliases the volume payload until migration."""
        level, lower, dims = self._meta[i]
        sg = Subgrid.__new__(Subgrid)
        sg.level = level
        sg.lower_logical = lower
        sg.dims_cells = dims
        sg.data = self.subgrid_data(i)
        return sg

    @property
    def subgrids(self) -> list[Subgrid]:
        return [self.subgrid(i) for i in range(self.subgrid_count)]

    @property
    def max_level(self) -> int:
        return max((m[0] for m in self._meta), default=0)

    def bvh(self) -> Bvh:
        """The point-query BVH, built on first use (build is serialized)."""
        if self._bvh is None:
            with self._bvh_lock:
                if self._bvh is None:
                    self._bvh = build_bvh(self)
        return self._bvh

    def invalidate_bvh(self) -> None:
        with self._bvh_lock:
            self._bvh = None

    def copy(self) -> "HierarchicalVolume":
        return HierarchicalVolume(
            self.subgrids, self.mapping, logical_dims=self.logical_dims, _validate=False
        )

    # -- sampling ---------------------------------------------------------

    def sample_basis(self, p) -> float:
        """Normalized hat-basis reconstruction at logical position p.

        Returns 0 where no hat support covers p.
        """
        pts = np.asarray(tuple(p), dtype=np.float64).reshape(1, 3)
        num = np.zeros(1)
        den = np.zeros(1)
        for i in sorted(self.bvh().query_point(pts[0])):
            _accumulate_hats(self, i, pts, num, den, np.array([0]))
        if den[0] > 0.0:
            return float(num[0] / den[0])
        return 0.0

    def sample_basis_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized basis sampling; points is (n, 3) logical (x, y, z)."""
        pts = np.asarray(points, dtype=np.float64)
        n = pts.shape[0]
        num = np.zeros(n)
        den = np.zeros(n)
        for i in range(self.subgrid_count):
            lo, hi = active_brick_region(self.subgrid(i))
            inside = np.all((pts >= lo) & (pts <= hi), axis=1)
            if not np.any(inside):
                continue
            sel = np.nonzero(inside)[0]
            _accumulate_hats(self, i, pts[sel], num, den, sel)
        out = np.zeros(n)
        covered = den > 0.0
        out[covered] = num[covered] / den[covered]
        return out

    def __repr__(self):
        d = self.logical_dims
        return (
            f"HierarchicalVolume({self.subgrid_count} subgrids, "
            f"logical {d.x}x{d.y}x{d.z}, levels 0..{self.max_level})"
        )


def _accumulate_hats(
    volume: HierarchicalVolume,
    subgrid_index: int,
    pts: np.ndarray,
    num: np.ndarray,
    den: np.ndarray,
    out_index: np.ndarray,
) -> None:
    """Add one subgrid's hat-weighted cell values for the given points.

    The corner visit order (z, then y, then x neighbor) is fixed so that
    scalar, batched, and BVH-accelerated callers accumulate identically.
    """
    level, lower, dims = volume._meta[subgrid_index]
    values = volume.subgrid_data(subgrid_index).astype(np.float64)
    w = float(1 << level)
    lower_f = np.array(lower, dtype=np.float64)
    n_axis = np.array([dims.x, dims.y, dims.z], dtype=np.int64)

    t = (pts - lower_f) / w - 0.5
    i0 = np.floor(t).astype(np.int64)
    frac = t - i0
    for dz in (0, 1):
        iz = i0[:, 2] + dz
        wz = frac[:, 2] if dz else 1.0 - frac[:, 2]
        for dy in (0, 1):
            iy = i0[:, 1] + dy
            wy = frac[:, 1] if dy else 1.0 - frac[:, 1]
            for dx in (0, 1):
                ix = i0[:, 0] + dx
                wx = frac[:, 0] if dx else 1.0 - frac[:, 0]
                valid = (
                    (ix >= 0) & (ix < n_axis[0])
                    & (iy >= 0) & (iy < n_axis[1])
                    & (iz >= 0) & (iz < n_axis[2])
                )
                if not np.any(valid):
                    continue
                sel = np.nonzero(valid)[0]
                # per-axis weights combine in fixed order z*y*x
                weight = wz[sel] * wy[sel] * wx[sel]
                vals = values[iz[sel], iy[sel], ix[sel]]
                dst = out_index[sel]  # unique per point within one subgrid visit
                num[dst] += weight * vals
                den[dst] += weight


def create_hierarchical_volume(subgrids: Iterable[Subgrid], mapping=(0.0, 1.0)) -> HierarchicalVolume:
    """Validate subgrid alignment and assemble a hierarchical volume."""
    return HierarchicalVolume(subgrids, mapping)
