"""The ``vkt`` command line tool.

Volumes travel between invocations as native-format bytes over files
(``-i``/``-o``) or standard streams, so subcommands compose with shell
pipes::

    vkt fill --value 1.0 -i vol.vkt | vkt aggregates

Exit codes: 0 success, 1 usage error, 2 data error.  Failed invocations
never leave a partial output file behind.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import io as vio
from . import ops
from .errors import InvalidArgument, IoFailure, VktError
from .execution import Device, ExecutionPolicy, set_execution_policy
from .geom import Vec3f, box3i
from .hier import HierarchicalVolume
from .image import write_image
from .render import Camera, RenderAlgo, RenderState, render
from .volume import DataFormat, LookupTable, StructuredVolume, VoxelMapping


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_io_args(p: _Parser, output=True):
    p.add_argument("-i", "--input", help="input volume path (default: standard input)")
    if output:
        p.add_argument("-o", "--output", help="output path (default: standard output)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="vkt", description="3D volume manipulation toolkit")
    parser.add_argument("--device", choices=["cpu", "emulated"], default="cpu",
                        help="device space algorithms run in")
    parser.add_argument("--workers", type=int, default=0,
                        help="worker count upper bound (0 = auto)")
    parser.add_argument("--timings", action="store_true",
                        help="print per-algorithm wall times to standard error")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("info", help="describe a volume")
    _add_io_args(p)

    p = sub.add_parser("fill", help="fill cells with a value")
    _add_io_args(p)
    p.add_argument("--value", type=float, required=True)
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("crop", help="extract a sub-box")
    _add_io_args(p)
    p.add_argument("--roi", type=int, nargs=6, required=True,
                   metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("delete", help="remove a slab spanning two axes")
    _add_io_args(p)
    p.add_argument("--roi", type=int, nargs=6, required=True,
                   metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("resample", help="resample onto a new structured grid")
    _add_io_args(p)
    p.add_argument("--dims", type=int, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--format", choices=["u8", "u16", "f32"])
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("flip", help="mirror along an axis")
    _add_io_args(p)
    p.add_argument("--axis", choices=["x", "y", "z"], required=True)

    p = sub.add_parser("rotate", help="rotate contents about an axis")
    _add_io_args(p)
    p.add_argument("--axis", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--angle", type=float, required=True, help="angle in radians")
    p.add_argument("--degrees", action="store_true", help="treat --angle as degrees")
    p.add_argument("--center", type=float, nargs=3, metavar=("X", "Y", "Z"),
                   help="world-space center (default: volume center)")
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("scale", help="scale contents about a center")
    _add_io_args(p)
    p.add_argument("--factors", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--center", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("filter", help="convolve with a kernel")
    _add_io_args(p)
    p.add_argument("--gaussian", type=float, metavar="SIGMA")
    p.add_argument("--ksize", type=int, help="kernel extent for --gaussian (odd)")
    p.add_argument("--kernel-file", help="text file: first line 'X Y Z', then weights")

    p = sub.add_parser("clahe", help="contrast limited adaptive histogram equalization")
    _add_io_args(p)
    p.add_argument("--bricks", type=int, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--clip", type=float, default=math.inf,
                   help="clip limit as a multiple of the uniform bin height (inf = off)")

    p = sub.add_parser("histogram", help="value histogram report")
    _add_io_args(p)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("aggregates", help="min/max/mean/stddev report")
    _add_io_args(p)
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("arith", help="voxel-wise arithmetic with a second volume")
    _add_io_args(p)
    p.add_argument("--op", choices=[op.value for op in ops.ArithmeticOp], required=True)
    p.add_argument("--with", dest="with_path", required=True, metavar="PATH",
                   help="second operand volume")
    p.add_argument("--roi", type=int, nargs=6, metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))

    p = sub.add_parser("decompose", help="split into bricks with optional ghost cells")
    _add_io_args(p, output=False)
    p.add_argument("-o", "--output", required=True, metavar="PREFIX",
                   help="output path prefix; bricks go to PREFIX0000.vkt, ...")
    p.add_argument("--brick-size", type=int, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--halo-lo", type=int, nargs=3, default=[0, 0, 0], metavar=("X", "Y", "Z"))
    p.add_argument("--halo-hi", type=int, nargs=3, default=[0, 0, 0], metavar=("X", "Y", "Z"))

    p = sub.add_parser("render", help="render to a PPM or PFM image")
    _add_io_args(p)
    p.add_argument("--algo", choices=[a.value for a in RenderAlgo], default="raymarch")
    p.add_argument("--lut", required=True, help="text file of 'R G B A' lines")
    p.add_argument("--size", type=int, nargs=2, default=[512, 512], metavar=("W", "H"))
    p.add_argument("--eye", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--center", type=float, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--up", type=float, nargs=3, default=[0.0, 1.0, 0.0], metavar=("X", "Y", "Z"))
    p.add_argument("--fovy", type=float, default=45.0)
    p.add_argument("--spp", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt-rate", type=float, default=1.0)
    p.add_argument("--iso", type=float, nargs="+", help="iso values (mapped units)")
    p.add_argument("--density-scale", type=float, default=1.0)
    p.add_argument("--max-bounces", type=int, default=10)
    p.add_argument("--background", type=float, nargs=3, default=[1.0, 1.0, 1.0],
                   metavar=("R", "G", "B"))
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="normalization range override")
    p.add_argument("--image-format", choices=["ppm", "pfm"],
                   help="default: by output extension")

    p = sub.add_parser("zoom", help="crop a region and resample it to a cell budget")
    _add_io_args(p)
    p.add_argument("--roi", type=int, nargs=6, required=True,
                   metavar=("X0", "Y0", "Z0", "X1", "Y1", "Z1"))
    p.add_argument("--cells", type=int, required=True, help="target total cell count")
    p.add_argument("--format", choices=["u8", "u16", "f32"], default="f32")

    p = sub.add_parser("bench", help="run the benchmark assortment")
    p.add_argument("-o", "--output", help="report path (default: standard output)")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--subgrids", type=int, default=64)
    p.add_argument("--bench-workers", type=int, default=8)
    p.add_argument("--repeat", type=int, default=3)

    p = sub.add_parser("raw-import", help="wrap a headerless raw payload")
    _add_io_args(p)
    p.add_argument("--dims", type=int, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--format", choices=["u8", "u16", "f32"], required=True)
    p.add_argument("--range", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))
    p.add_argument("--cell-size", type=float, nargs=3, default=[1.0, 1.0, 1.0],
                   metavar=("X", "Y", "Z"))

    return parser


# -- stream helpers ---------------------------------------------------------


def _read_volume_arg(args):
    if getattr(args, "input", None):
        return vio.read_volume(args.input)
    payload = sys.stdin.buffer.read()
    if not payload:
        raise IoFailure("no input volume: pass -i PATH or pipe volume bytes")
    return vio.volume_from_bytes(payload)


def _read_raw_arg(args) -> bytes:
    if getattr(args, "input", None):
        try:
            return Path(args.input).read_bytes()
        except OSError as e:
            raise IoFailure(str(e)) from e
    return sys.stdin.buffer.read()


def _write_bytes_out(path, payload: bytes) -> None:
    if not path:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) or ".", prefix=target.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_text_out(path, text: str) -> None:
    _write_bytes_out(path, text.encode())


def _write_volume_out(args, volume) -> None:
    _write_bytes_out(getattr(args, "output", None), vio.volume_to_bytes(volume))


def _roi_box(values):
    return box3i(values[:3], values[3:])


def _volume_center(volume) -> Vec3f:
    if isinstance(volume, StructuredVolume):
        e = volume.world_extent
    else:
        e = volume.logical_dims
    return Vec3f(e[0] / 2.0, e[1] / 2.0, e[2] / 2.0)


def _load_lut(path) -> LookupTable:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise IoFailure(str(e)) from e
    rows = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InvalidArgument(f"lookup table line needs 4 values, got {line!r}")
        rows.append([float(v) for v in parts])
    if not rows:
        raise InvalidArgument(f"lookup table file {path} holds no entries")
    return LookupTable(len(rows), np.asarray(rows))


# -- subcommand implementations ------------------------------------------------


def _cmd_info(args) -> int:
    volume = _read_volume_arg(args)
    lines = []
    if isinstance(volume, StructuredVolume):
        d = volume.dims
        lines += [
            "type: structured",
            f"dims: {d.x}x{d.y}x{d.z}",
            f"format: {volume.format.short_name}",
            f"cellsize: {volume.cell_size.x:g} {volume.cell_size.y:g} {volume.cell_size.z:g}",
            f"range: {volume.mapping.lo:g} {volume.mapping.hi:g}",
            f"cells: {volume.cell_count}",
            f"bytes: {volume.data.byte_length}",
        ]
    else:
        d = volume.logical_dims
        lines += [
            "type: hierarchical",
            f"logicaldims: {d.x}x{d.y}x{d.z}",
            f"subgrids: {volume.subgrid_count}",
            f"levels: {volume.max_level + 1}",
            f"cells: {volume.cell_count}",
            f"range: {volume.mapping.lo:g} {volume.mapping.hi:g}",
        ]
    _write_text_out(getattr(args, "output", None), "\n".join(lines) + "\n")
    return 0


def _cmd_fill(args) -> int:
    volume = _read_volume_arg(args)
    if args.roi:
        ops.fill_range(volume, _roi_box(args.roi), args.value)
    else:
        ops.fill(volume, args.value)
    _write_volume_out(args, volume)
    return 0


def _cmd_crop(args) -> int:
    volume = _read_volume_arg(args)
    roi = _roi_box(args.roi)
    if isinstance(volume, HierarchicalVolume):
        out = ops.crop_hierarchical(volume, roi)
    else:
        out = ops.crop(volume, roi)
    _write_volume_out(args, out)
    return 0


def _cmd_delete(args) -> int:
    volume = _read_volume_arg(args)
    _write_volume_out(args, ops.delete(volume, _roi_box(args.roi)))
    return 0


def _cmd_resample(args) -> int:
    volume = _read_volume_arg(args)
    fmt = DataFormat.parse(args.format) if args.format else None
    mapping = VoxelMapping(*args.range) if args.range else None
    _write_volume_out(args, ops.resample(volume, args.dims, fmt, mapping))
    return 0


def _cmd_flip(args) -> int:
    volume = _read_volume_arg(args)
    ops.flip(volume, args.axis)
    _write_volume_out(args, volume)
    return 0


def _cmd_rotate(args) -> int:
    volume = _read_volume_arg(args)
    angle = math.radians(args.angle) if args.degrees else args.angle
    center = args.center if args.center else _volume_center(volume)
    roi = _roi_box(args.roi) if args.roi else volume.bounds
    ops.rotate_range(volume, roi, args.axis, angle, center)
    _write_volume_out(args, volume)
    return 0


def _cmd_scale(args) -> int:
    volume = _read_volume_arg(args)
    center = args.center if args.center else _volume_center(volume)
    roi = _roi_box(args.roi) if args.roi else volume.bounds
    ops.scale_range(volume, roi, args.factors, center)
    _write_volume_out(args, volume)
    return 0


def _cmd_filter(args) -> int:
    volume = _read_volume_arg(args)
    if (args.gaussian is None) == (args.kernel_file is None):
        raise InvalidArgument("pass exactly one of --gaussian or --kernel-file")
    if args.gaussian is not None:
        kernel = ops.gaussian_kernel(args.gaussian, args.ksize)
    else:
        try:
            text = Path(args.kernel_file).read_text().split()
        except OSError as e:
            raise IoFailure(str(e)) from e
        dims = [int(v) for v in text[:3]]
        weights = [float(v) for v in text[3:]]
        kernel = ops.Kernel(dims, weights)
    ops.apply_filter(volume, kernel)
    _write_volume_out(args, volume)
    return 0


def _cmd_clahe(args) -> int:
    volume = _read_volume_arg(args)
    params = ops.ClaheParams(tuple(args.bricks), args.bins, args.clip)
    ops.clahe_equalize(volume, params)
    _write_volume_out(args, volume)
    return 0


def _cmd_histogram(args) -> int:
    volume = _read_volume_arg(args)
    if args.roi:
        hist = ops.compute_histogram_range(volume, _roi_box(args.roi), args.bins)
    else:
        hist = ops.compute_histogram(volume, args.bins)
    lines = [
        f"bins: {hist.num_bins}",
        f"range: {hist.range.lo:g} {hist.range.hi:g}",
        "counts: " + " ".join(str(int(c)) for c in hist.counts),
        f"total: {int(hist.counts.sum())}",
    ]
    _write_text_out(getattr(args, "output", None), "\n".join(lines) + "\n")
    return 0


def _cmd_aggregates(args) -> int:
    volume = _read_volume_arg(args)
    if args.roi:
        agg = ops.compute_aggregates_range(volume, _roi_box(args.roi))
    else:
        agg = ops.compute_aggregates(volume)
    lines = [
        f"min: {agg.min:.9g}",
        f"max: {agg.max:.9g}",
        f"argmin: {agg.argmin.x} {agg.argmin.y} {agg.argmin.z}",
        f"argmax: {agg.argmax.x} {agg.argmax.y} {agg.argmax.z}",
        f"mean: {agg.mean:.9g}",
        f"stddev: {agg.stddev:.9g}",
    ]
    _write_text_out(getattr(args, "output", None), "\n".join(lines) + "\n")
    return 0


def _cmd_arith(args) -> int:
    a = _read_volume_arg(args)
    b = vio.read_volume(args.with_path)
    dest = a.copy()
    roi = _roi_box(args.roi) if args.roi else dest.bounds
    ops.arithmetic_range(ops.ArithmeticOp.parse(args.op), dest, a, b, roi)
    _write_volume_out(args, dest)
    return 0


def _cmd_decompose(args) -> int:
    volume = _read_volume_arg(args)
    bricks = ops.brick_decompose(volume, args.brick_size, args.halo_lo, args.halo_hi)
    lines = []
    for i, (offset, brick) in enumerate(bricks):
        path = f"{args.output}{i:04d}.vkt"
        _write_bytes_out(path, vio.volume_to_bytes(brick))
        d = brick.dims
        lines.append(
            f"brick_{i:04d}: offset {offset.x} {offset.y} {offset.z} "
            f"dims {d.x}x{d.y}x{d.z} path {path}"
        )
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _cmd_render(args) -> int:
    volume = _read_volume_arg(args)
    if not args.output:
        raise InvalidArgument("render needs -o IMAGE_PATH")
    lut = _load_lut(args.lut)
    center = Vec3f(*args.center) if args.center else _volume_center(volume)
    if args.eye:
        eye = Vec3f(*args.eye)
    else:
        if isinstance(volume, StructuredVolume):
            extent = volume.world_extent
        else:
            extent = volume.logical_dims
        eye = Vec3f(center.x, center.y, center.z + 2.0 * max(extent))
    camera = Camera(eye, center, Vec3f(*args.up), args.fovy, args.size[0], args.size[1])
    state = RenderState(
        render_algo=RenderAlgo.parse(args.algo),
        rgba_lookup_table=lut.resource_handle,
        dt_rate=args.dt_rate,
        iso_values=tuple(args.iso) if args.iso else (),
        samples_per_pixel=args.spp,
        max_bounces=args.max_bounces,
        density_scale=args.density_scale,
        background=tuple(args.background),
        seed=args.seed,
        value_range=VoxelMapping(*args.range) if args.range else None,
    )
    img = render(volume, camera, state)
    write_image(img, args.output, args.image_format)
    return 0


def _cmd_zoom(args) -> int:
    volume = _read_volume_arg(args)
    roi = _roi_box(args.roi)
    if args.cells < 1:
        raise InvalidArgument("--cells must be >= 1")
    if isinstance(volume, HierarchicalVolume):
        cropped = ops.crop_hierarchical(volume, roi)
    else:
        cropped = ops.crop(volume, roi)
    extent = roi.dims
    scale = (args.cells / (extent.x * extent.y * extent.z)) ** (1.0 / 3.0)
    dims = tuple(max(1, int(math.floor(extent[a] * scale + 0.5))) for a in range(3))
    out = ops.resample(cropped, dims, DataFormat.parse(args.format))
    _write_volume_out(args, out)
    return 0


def _cmd_bench(args) -> int:
    reports = bench_mod.run_benchmarks(
        size=args.size,
        subgrid_count=args.subgrids,
        workers=args.bench_workers,
        repeat=args.repeat,
    )
    lines = [
        f"bench: case={r['case']} serial_s={r['serial_s']:.6f} "
        f"parallel_s={r['parallel_s']:.6f} workers={r['workers']} "
        f"effective_workers={r['effective_workers']}"
        for r in reports
    ]
    _write_text_out(getattr(args, "output", None), "\n".join(lines) + "\n")
    return 0


def _cmd_raw_import(args) -> int:
    payload = _read_raw_arg(args)
    volume = vio.load_raw(
        payload,
        args.dims,
        DataFormat.parse(args.format),
        tuple(args.cell_size),
        VoxelMapping(*args.range),
    )
    _write_volume_out(args, volume)
    return 0


_COMMANDS = {
    "info": _cmd_info,
    "fill": _cmd_fill,
    "crop": _cmd_crop,
    "delete": _cmd_delete,
    "resample": _cmd_resample,
    "flip": _cmd_flip,
    "rotate": _cmd_rotate,
    "scale": _cmd_scale,
    "filter": _cmd_filter,
    "clahe": _cmd_clahe,
    "histogram": _cmd_histogram,
    "aggregates": _cmd_aggregates,
    "arith": _cmd_arith,
    "decompose": _cmd_decompose,
    "render": _cmd_render,
    "zoom": _cmd_zoom,
    "bench": _cmd_bench,
    "raw-import": _cmd_raw_import,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    device = Device.EMULATED_DEVICE if args.device == "emulated" else Device.CPU
    set_execution_policy(
        ExecutionPolicy(device=device, worker_count=args.workers, print_timings=args.timings)
    )
    try:
        return _COMMANDS[args.command](args)
    except VktError as e:
        print(f"error: {e.name}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: IoFailure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
