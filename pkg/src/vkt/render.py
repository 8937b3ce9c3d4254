"""Headless volume rendering: ray marching, iso-surfaces, and path tracing.

All three integrators share a pinhole camera, an RGBA lookup table that
classifies mapping-normalized samples, and a model of the volume as the
axis-aligned box ``[0, dims * cell_size)`` (hierarchical volumes span
their logical grid with unit cells).

Determinism contract: identical (scene, state, seed) produce
bit-identical images for any worker count.  Work is partitioned into
fixed row blocks and every per-pixel computation is independent, so
scheduling cannot reorder arithmetic.  The path tracer draws all
randomness from a counter-based hash of (seed, pixel, sample, draw
counter), never from shared sequential state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import InvalidArgument, NoIsoValues, UnresolvedHandle, UnresolvedLut
from .execution import parallel_for, timed
from .geom import Vec3f, fvec3
from .hier import HierarchicalVolume
from .image import ImageRGBA
from .managed import INVALID_HANDLE, registry
from .volume import LookupTable, StructuredVolume, VoxelMapping, sample_grid_linear

AnyVolume = Union[StructuredVolume, HierarchicalVolume]

_ROW_BLOCK = 32  # fixed row partition; must not depend on worker count


class RenderAlgo(Enum):
    RAY_MARCHING = "raymarch"
    IMPLICIT_ISO = "iso"
    MULTI_SCATTERING = "pathtrace"

    @classmethod
    def parse(cls, name: str) -> "RenderAlgo":
        for algo in cls:
            if algo.value == name.strip().lower():
                return algo
        raise InvalidArgument(f"unknown render algorithm {name!r}")


@dataclass
class Camera:
    """Pinhole camera; the image plane is row-major with top-left origin."""

    eye: Vec3f
    center: Vec3f
    up: Vec3f = Vec3f(0.0, 1.0, 0.0)
    fovy_degrees: float = 45.0
    width: int = 512
    height: int = 512

    def __post_init__(self):
        self.eye = fvec3(self.eye, "eye")
        self.center = fvec3(self.center, "center")
        self.up = fvec3(self.up, "up")
        if not 0.0 < self.fovy_degrees < 180.0:
            raise InvalidArgument(f"fovy must be in (0, 180), got {self.fovy_degrees}")
        if self.width < 1 or self.height < 1:
            raise InvalidArgument("image size must be >= 1x1")
        fwd = np.subtract(self.center, self.eye)
        if not np.linalg.norm(fwd) > 0:
            raise InvalidArgument("eye and center coincide")
        cr = np.cross(self.up, -fwd)
        if not np.linalg.norm(cr) > 0:
            raise InvalidArgument("up vector is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w = np.subtract(self.eye, self.center).astype(np.float64)
        w /= np.linalg.norm(w)
        u = np.cross(np.asarray(self.up, dtype=np.float64), w)
        u /= np.linalg.norm(u)
        v = np.cross(w, u)
        return u, v, w


@dataclass
class RenderState:
    """Renderer configuration shared by the three integrators."""

    render_algo: RenderAlgo = RenderAlgo.RAY_MARCHING
    rgba_lookup_table: int = INVALID_HANDLE
    dt_rate: float = 1.0
    iso_values: tuple[float, ...] = field(default_factory=tuple)
    samples_per_pixel: int = 1
    max_bounces: int = 10
    density_scale: float = 1.0
    background: Vec3f = Vec3f(1.0, 1.0, 1.0)
    seed: int = 0
    value_range: Optional[VoxelMapping] = None

    def __post_init__(self):
        if self.dt_rate <= 0:
            raise InvalidArgument(f"dt_rate must be > 0, got {self.dt_rate}")
        if self.samples_per_pixel < 1:
            raise InvalidArgument("samples_per_pixel must be >= 1")
        if self.max_bounces < 1:
            raise InvalidArgument("max_bounces must be >= 1")
        if self.density_scale <= 0:
            raise InvalidArgument("density_scale must be > 0")
        self.background = fvec3(self.background, "background")
        self.iso_values = tuple(float(v) for v in self.iso_values)


def _resolve_lut(state: RenderState) -> LookupTable:
    try:
        lut = registry.resolve(state.rgba_lookup_table)
    except UnresolvedHandle as e:
        raise UnresolvedLut(str(e)) from e
    if not isinstance(lut, LookupTable):
        raise UnresolvedLut(f"handle {state.rgba_lookup_table} is not a lookup table")
    return lut


class _Scene:
    """Uniform sampling facade over structured and hierarchical volumes."""

    def __init__(self, volume: AnyVolume, state: RenderState):
        if isinstance(volume, StructuredVolume):
            self.grid = volume.mapped_array()
            self.cell = np.asarray(volume.cell_size, dtype=np.float64)
            self.extent = np.asarray(volume.world_extent, dtype=np.float64)
            self.min_cell = float(min(volume.cell_size))
            self._hier = None
        else:
            volume.data.migrate()
            self._hier = volume
            self.cell = np.ones(3)
            self.extent = np.asarray(volume.logical_dims, dtype=np.float64)
            self.min_cell = 1.0
        vr = state.value_range or volume.mapping
        self.lo, self.hi = vr.lo, vr.hi

    def sample(self, pts: np.ndarray) -> np.ndarray:
        if self._hier is not None:
            return self._hier.sample_basis_many(pts)
        return sample_grid_linear(self.grid, self.cell, pts)

    def normalized(self, pts: np.ndarray) -> np.ndarray:
        v = self.sample(pts)
        return np.clip((v - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def normalize_value(self, v: float) -> float:
        return min(max((v - self.lo) / (self.hi - self.lo), 0.0), 1.0)


def _classify_many(table: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized piecewise-linear RGBA lookup (table is (n, 4) float64)."""
    n = table.shape[0]
    t = np.clip(t, 0.0, 1.0)
    if n == 1:
        return np.broadcast_to(table[0], t.shape + (4,)).copy()
    pos = t * (n - 1)
    i0 = np.minimum(np.floor(pos).astype(np.int64), n - 2)
    f = (pos - i0)[..., None]
    return table[i0] + f * (table[i0 + 1] - table[i0])


def classify(lut: LookupTable, t: float) -> tuple[float, float, float, float]:
    """Piecewise-linear RGBA lookup of one normalized scalar."""
    return lut.classify(t)


def _pixel_grid(cam: Camera, rows: tuple[int, int]):
    y0, y1 = rows
    ys, xs = np.mgrid[y0:y1, 0 : cam.width]
    return xs.reshape(-1).astype(np.float64), ys.reshape(-1).astype(np.float64)


def _rays(cam: Camera, px: np.ndarray, py: np.ndarray, jx, jy):
    u, v, w = cam.basis()
    tanf = math.tan(math.radians(cam.fovy_degrees) / 2.0)
    aspect = cam.width / cam.height
    sx = ((px + jx) / cam.width * 2.0 - 1.0) * tanf * aspect
    sy = (1.0 - (py + jy) / cam.height * 2.0) * tanf
    d = sx[:, None] * u + sy[:, None] * v - w
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.broadcast_to(np.asarray(cam.eye, dtype=np.float64), d.shape).copy()
    return o, d


def _intersect_box(o: np.ndarray, d: np.ndarray, extent: np.ndarray):
    """Slab test against [0, extent]; returns (t0, t1, hit) with t0 >= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (0.0 - o) * inv
        tb = (extent - o) * inv
    tmin = np.fmin(ta, tb)  # fmin/fmax ignore NaNs from 0 * inf
    tmax = np.fmax(ta, tb)
    t0 = np.maximum(np.max(tmin, axis=1), 0.0)
    t1 = np.min(tmax, axis=1)
    return t0, t1, t1 > t0


def _row_blocks(height: int) -> list[tuple[int, int]]:
    return [(y, min(height, y + _ROW_BLOCK)) for y in range(0, height, _ROW_BLOCK)]


# -- ray marching ------------------------------------------------------------


@timed("Render[RayMarching]")
def render_ray_marching(volume: AnyVolume, camera: Camera, state: RenderState) -> ImageRGBA:
    """Absorption/emission marching with front-to-back compositing.

    Per-step opacity is corrected by ``1 - (1 - a)**dt_rate`` so the
    composited transmittance is step-size invariant; rays stop once
    accumulated opacity exceeds 0.999.
    """
    lut = _resolve_lut(state)
    table = lut.table().astype(np.float64)
    scene = _Scene(volume, state)
    bg = np.asarray(state.background, dtype=np.float64)
    img = ImageRGBA(camera.width, camera.height)
    blocks = _row_blocks(camera.height)

    def run_block(bi: int) -> None:
        rows = blocks[bi]
        px, py = _pixel_grid(camera, rows)
        o, d = _rays(camera, px, py, 0.5, 0.5)
        t0, t1, hit = _intersect_box(o, d, scene.extent)
        n = o.shape[0]
        color = np.zeros((n, 3))
        alpha = np.zeros(n)
        dt = state.dt_rate * scene.min_cell
        t = t0 + 0.5 * dt
        active = hit & (t < t1)
        while np.any(active):
            idx = np.nonzero(active)[0]
            pos = o[idx] + t[idx, None] * d[idx]
            rgba = _classify_many(table, scene.normalized(pos))
            a_s = np.clip(rgba[:, 3], 0.0, 1.0)
            a_step = 1.0 - (1.0 - a_s) ** state.dt_rate
            weight = (1.0 - alpha[idx]) * a_step
            color[idx] += weight[:, None] * rgba[:, :3]
            alpha[idx] += weight
            t[idx] += dt
            active[idx] = (t[idx] < t1[idx]) & (alpha[idx] <= 0.999)
        rgb = color + (1.0 - alpha)[:, None] * bg
        out = np.concatenate([rgb, alpha[:, None]], axis=1)
        img.data[rows[0] : rows[1]] = out.reshape(rows[1] - rows[0], camera.width, 4).astype(np.float32)

    parallel_for(len(blocks), run_block)
    return img


# -- implicit iso-surfaces ------------------------------------------------------


@timed("Render[ImplicitIso]")
def render_implicit_iso(
    volume: AnyVolume, camera: Camera, state: RenderState, return_depth: bool = False
):
    """First iso-surface crossing along each ray, bisection-refined.

    Shading is headlight-style: |normal . -ray| times the table color of
    the iso value; with several iso values the nearest hit wins.
    """
    if not state.iso_values:
        raise NoIsoValues("implicit iso rendering needs at least one iso value")
    lut = _resolve_lut(state)
    table = lut.table().astype(np.float64)
    scene = _Scene(volume, state)
    bg = np.asarray(state.background, dtype=np.float64)
    img = ImageRGBA(camera.width, camera.height)
    depth_img = np.full((camera.height, camera.width), np.inf)
    blocks = _row_blocks(camera.height)

    def run_block(bi: int) -> None:
        rows = blocks[bi]
        px, py = _pixel_grid(camera, rows)
        o, d = _rays(camera, px, py, 0.5, 0.5)
        n = o.shape[0]
        best_t = np.full(n, np.inf)
        best_rgb = np.zeros((n, 3))
        for iso in state.iso_values:
            t_hit, found = _march_iso(scene, state, o, d, float(iso))
            nrm = _gradient_normals(scene, o, d, t_hit, found)
            facing = np.abs(np.sum(nrm * -d, axis=1))
            iso_rgb = _classify_many(table, np.asarray([scene.normalize_value(iso)]))[0, :3]
            closer = found & (t_hit < best_t)
            best_t = np.where(closer, t_hit, best_t)
            best_rgb[closer] = facing[closer, None] * iso_rgb
        hit = np.isfinite(best_t)
        rgb = np.where(hit[:, None], best_rgb, bg)
        out = np.concatenate([rgb, hit[:, None].astype(np.float64)], axis=1)
        img.data[rows[0] : rows[1]] = out.reshape(rows[1] - rows[0], camera.width, 4).astype(np.float32)
        depth_img[rows[0] : rows[1]] = best_t.reshape(rows[1] - rows[0], camera.width)

    parallel_for(len(blocks), run_block)
    if return_depth:
        return img, depth_img
    return img


def _march_iso(scene: _Scene, state: RenderState, o, d, iso: float):
    """March until the sampled field crosses `iso`, then bisect 8 times."""
    t0, t1, hit = _intersect_box(o, d, scene.extent)
    n = o.shape[0]
    dt = state.dt_rate * scene.min_cell
    t_prev = t0.copy()
    f_prev = np.zeros(n)
    idx0 = np.nonzero(hit)[0]
    if idx0.size:
        f_prev[idx0] = scene.sample(o[idx0] + t_prev[idx0, None] * d[idx0]) - iso
    found = np.zeros(n, dtype=bool)
    lo_t = np.zeros(n)
    hi_t = np.zeros(n)
    lo_f = np.zeros(n)
    active = hit.copy()
    t = t0 + dt
    while np.any(active):
        idx = np.nonzero(active)[0]
        t_eval = np.minimum(t[idx], t1[idx])
        f = scene.sample(o[idx] + t_eval[:, None] * d[idx]) - iso
        crossing = f_prev[idx] * f <= 0.0
        newly = idx[crossing]
        lo_t[newly] = t_prev[newly]
        hi_t[newly] = t_eval[crossing]
        lo_f[newly] = f_prev[newly]
        found[newly] = True
        f_prev[idx] = f
        t_prev[idx] = t_eval
        t[idx] += dt
        active[idx] = ~found[idx] & (t_prev[idx] < t1[idx])
    # bisection refinement on the found set
    sel = np.nonzero(found)[0]
    for _ in range(8):
        if not sel.size:
            break
        mid = 0.5 * (lo_t[sel] + hi_t[sel])
        fm = scene.sample(o[sel] + mid[:, None] * d[sel]) - iso
        take_lo = lo_f[sel] * fm <= 0.0
        hi_t[sel] = np.where(take_lo, mid, hi_t[sel])
        lo_t[sel] = np.where(take_lo, lo_t[sel], mid)
        lo_f[sel] = np.where(take_lo, lo_f[sel], fm)
    t_hit = np.where(found, 0.5 * (lo_t + hi_t), np.inf)
    return t_hit, found


def _gradient_normals(scene: _Scene, o, d, t_hit, found):
    """Normalized central-difference gradients (one cell step per axis)."""
    n = o.shape[0]
    normals = np.zeros((n, 3))
    sel = np.nonzero(found)[0]
    if not sel.size:
        return normals
    pos = o[sel] + t_hit[sel, None] * d[sel]
    grad = np.zeros((sel.size, 3))
    for a in range(3):
        step = np.zeros(3)
        step[a] = scene.cell[a]
        grad[:, a] = (scene.sample(pos + step) - scene.sample(pos - step)) / (2.0 * scene.cell[a])
    norm = np.linalg.norm(grad, axis=1, keepdims=True)
    ok = norm[:, 0] > 0
    grad[ok] /= norm[ok]
    grad[~ok] = 0.0
    normals[sel] = grad
    return normals


# -- volumetric path tracing -----------------------------------------------------


_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _rng_uniform(seed: np.uint64, pixel: np.ndarray, sample: int, ctr: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0, 1): a pure hash of the coordinates."""
    h = _mix64(np.uint64(seed) + _GAMMA + np.zeros_like(pixel))
    h = _mix64(h ^ pixel)
    h = _mix64(h ^ np.uint64(sample))
    h = _mix64(h ^ ctr)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


_DRAWS_PER_EVENT = 8  # reserved rng slots per path event (2 used for jitter)


@timed("Render[MultiScattering]")
def render_multi_scattering(volume: AnyVolume, camera: Camera, state: RenderState) -> ImageRGBA:
    """Isotropic single-albedo path tracing with delta-tracking flights.

    The majorant extinction equals density_scale; the table alpha (clamped
    to [0, 1]) scales it locally, and the table color acts as the albedo
    at real collisions.  Paths exit to the constant background radiance,
    stop after max_bounces scatters, and face Russian roulette from the
    third bounce with survival clamped to [0.05, 0.95].
    """
    lut = _resolve_lut(state)
    table = lut.table().astype(np.float64)
    scene = _Scene(volume, state)
    bg = np.asarray(state.background, dtype=np.float64)
    img = ImageRGBA(camera.width, camera.height)
    blocks = _row_blocks(camera.height)
    seed = np.uint64(state.seed & 0xFFFFFFFFFFFFFFFF)

    def run_block(bi: int) -> None:
        rows = blocks[bi]
        px, py = _pixel_grid(camera, rows)
        pixel_ids = (py * camera.width + px).astype(np.uint64)
        n = px.shape[0]
        mean = np.zeros((n, 3))
        for s in range(state.samples_per_pixel):
            radiance = _trace_paths(scene, table, state, camera, px, py, pixel_ids, s, seed, bg)
            mean += (radiance - mean) / (s + 1)
        out = np.concatenate([mean, np.ones((n, 1))], axis=1)
        img.data[rows[0] : rows[1]] = out.reshape(rows[1] - rows[0], camera.width, 4).astype(np.float32)

    parallel_for(len(blocks), run_block)
    return img


def _trace_paths(scene, table, state, camera, px, py, pixel_ids, sample: int, seed, bg):
    n = px.shape[0]
    jx = _rng_uniform(seed, pixel_ids, sample, np.zeros(n, dtype=np.uint64))
    jy = _rng_uniform(seed, pixel_ids, sample, np.ones(n, dtype=np.uint64))
    o, d = _rays(camera, px, py, jx, jy)
    t0, t1, hit = _intersect_box(o, d, scene.extent)

    radiance = np.zeros((n, 3))
    throughput = np.ones((n, 3))
    mu_bar = state.density_scale
    t_cur = t0.copy()
    t_exit = t1.copy()
    bounce = np.zeros(n, dtype=np.int64)
    event = np.zeros(n, dtype=np.uint64)
    alive = hit.copy()
    # rays that miss the box see the background directly
    radiance[~hit] = bg

    guard = 0
    while np.any(alive):
        guard += 1
        if guard > 1_000_000:  # pathological parameters; fail deterministically
            break
        idx = np.nonzero(alive)[0]
        base = np.uint64(2) + event[idx] * np.uint64(_DRAWS_PER_EVENT)
        pid = pixel_ids[idx]

        u_flight = _rng_uniform(seed, pid, sample, base)
        t_cur[idx] = t_cur[idx] - np.log1p(-u_flight) / mu_bar

        exited = t_cur[idx] >= t_exit[idx]
        exit_ids = idx[exited]
        radiance[exit_ids] = throughput[exit_ids] * bg
        alive[exit_ids] = False

        live = idx[~exited]
        if live.size == 0:
            continue
        pos = o[live] + t_cur[live, None] * d[live]
        rgba = _classify_many(table, scene.normalized(pos))
        a = np.clip(rgba[:, 3], 0.0, 1.0)
        u_accept = _rng_uniform(seed, pixel_ids[live], sample, base[~exited] + np.uint64(1))
        real = u_accept < a

        event[live] += np.uint64(1)
        hit_ids = live[real]
        if hit_ids.size == 0:
            continue
        bounce[hit_ids] += 1
        over = bounce[hit_ids] > state.max_bounces
        alive[hit_ids[over]] = False  # absorbed at the bounce limit
        hit_ids = hit_ids[~over]
        if hit_ids.size == 0:
            continue
        sub = np.nonzero(real)[0][~over]

        throughput[hit_ids] *= rgba[sub, :3]
        tp_max = throughput[hit_ids].max(axis=1)
        dead = tp_max <= 0.0
        alive[hit_ids[dead]] = False
        hit_ids = hit_ids[~dead]
        sub = sub[~dead]
        if hit_ids.size == 0:
            continue

        rr = bounce[hit_ids] >= 3
        if np.any(rr):
            rr_ids = hit_ids[rr]
            p = np.clip(throughput[rr_ids].max(axis=1), 0.05, 0.95)
            u_rr = _rng_uniform(
                seed, pixel_ids[rr_ids], sample,
                np.uint64(2) + (event[rr_ids] - np.uint64(1)) * np.uint64(_DRAWS_PER_EVENT) + np.uint64(2),
            )
            killed = u_rr >= p
            alive[rr_ids[killed]] = False
            survivors = rr_ids[~killed]
            throughput[survivors] /= p[~killed, None]
            keep = np.isin(hit_ids, rr_ids[killed], invert=True)
            hit_ids = hit_ids[keep]
            sub = sub[keep]
            if hit_ids.size == 0:
                continue

        base_hit = np.uint64(2) + (event[hit_ids] - np.uint64(1)) * np.uint64(_DRAWS_PER_EVENT)
        u1 = _rng_uniform(seed, pixel_ids[hit_ids], sample, base_hit + np.uint64(3))
        u2 = _rng_uniform(seed, pixel_ids[hit_ids], sample, base_hit + np.uint64(4))
        z = 1.0 - 2.0 * u1
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = 2.0 * math.pi * u2
        new_d = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)

        new_o = o[hit_ids] + t_cur[hit_ids, None] * d[hit_ids]
        o[hit_ids] = new_o
        d[hit_ids] = new_d
        nt0, nt1, nhit = _intersect_box(new_o, new_d, scene.extent)
        t_cur[hit_ids] = 0.0
        t_exit[hit_ids] = nt1
        # a degenerate restart (numerically outside the box) exits immediately
        bad = ~nhit & (nt1 <= 0)
        if np.any(bad):
            bad_ids = hit_ids[bad]
            radiance[bad_ids] = throughput[bad_ids] * bg
            alive[bad_ids] = False

    return radiance


# -- dispatch --------------------------------------------------------------------


@timed("Render")
def render(volume: AnyVolume, camera: Camera, state: RenderState) -> ImageRGBA:
    """Render with the algorithm selected by the state.

    Migrates the volume and the lookup table into the current device
    space before sampling.
    """
    lut = _resolve_lut(state)
    volume.data.migrate()
    lut.data.migrate()
    if state.render_algo is RenderAlgo.RAY_MARCHING:
        return render_ray_marching(volume, camera, state)
    if state.render_algo is RenderAlgo.IMPLICIT_ISO:
        return render_implicit_iso(volume, camera, state)
    if state.render_algo is RenderAlgo.MULTI_SCATTERING:
        return render_multi_scattering(volume, camera, state)
    raise InvalidArgument(f"unknown render algorithm {state.render_algo}")
