import subprocess
import sys

import numpy as np
import pytest

import vkt

from conftest import index_stamped_volume, random_volume

VKT = [sys.executable, "-m", "vkt"]


def run_cli(*args, stdin=None):
    return subprocess.run(
        VKT + list(args), input=stdin, capture_output=True, timeout=300
    )


class TestBasicCommands:
    def test_fill_pipe_aggregates(self, rng, tmp_path):
        path = tmp_path / "a.vkt"
        vkt.write_volume(path, random_volume(rng, (6, 6, 6)))
        filled = run_cli("fill", "--value", "1.0", "-i", str(path))
        assert filled.returncode == 0
        agg = run_cli("aggregates", stdin=filled.stdout)
        assert agg.returncode == 0
        report = dict(
            line.split(": ", 1) for line in agg.stdout.decode().strip().splitlines()
        )
        assert float(report["min"]) == 1.0
        assert float(report["max"]) == 1.0

    def test_info_tokens(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (12, 10, 8)))
        out = run_cli("info", "-i", str(path))
        text = out.stdout.decode()
        assert "structured" in text
        assert "12x10x8" in text
        assert "u8" in text

    def test_info_hierarchical(self, tmp_path):
        path = tmp_path / "h.vkt"
        vkt.write_volume(path, vkt.synthetic_hierarchical(9))
        text = run_cli("info", "-i", str(path)).stdout.decode()
        assert "hierarchical" in text
        assert "subgrids: 9" in text

    def test_usage_error_exits_one(self):
        out = run_cli("frobnicate")
        assert out.returncode == 1

    def test_missing_input_is_data_error(self):
        out = run_cli("info", "-i", "/nonexistent/path.vkt")
        assert out.returncode == 2
        assert b"IoFailure" in out.stderr

    def test_histogram_report(self, tmp_path):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.UINT8)
        vkt.fill(v, 1.0)
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, v)
        out = run_cli("histogram", "--bins", "4", "-i", str(path))
        lines = out.stdout.decode().strip().splitlines()
        assert lines[0] == "bins: 4"
        assert lines[2] == "counts: 0 0 0 64"
        assert lines[3] == "total: 64"

    def test_timings_go_to_stderr(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (4, 4, 4)))
        out = run_cli("--timings", "fill", "--value", "0.5", "-i", str(path),
                      "-o", str(tmp_path / "o.vkt"))
        assert out.returncode == 0
        assert b"FillRange" in out.stderr


class TestPipeTransparency:
    def test_crop_flip_pipe_equals_library(self, rng, tmp_path):
        v = random_volume(rng, (8, 8, 8), vkt.DataFormat.UINT16)
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, v)
        first = run_cli("crop", "--roi", "1", "1", "1", "7", "7", "7", "-i", str(path))
        assert first.returncode == 0
        second = run_cli("flip", "--axis", "y", stdin=first.stdout)
        assert second.returncode == 0
        expected = vkt.crop(v, vkt.box3i((1, 1, 1), (7, 7, 7)))
        vkt.flip(expected, "y")
        assert second.stdout == vkt.volume_to_bytes(expected)


class TestNoPartialOutputs:
    def test_failing_command_leaves_output_untouched(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (4, 4, 4)))
        target = tmp_path / "out.vkt"
        target.write_bytes(b"precious")
        out = run_cli("crop", "--roi", "0", "0", "0", "9", "9", "9",
                      "-i", str(path), "-o", str(target))
        assert out.returncode == 2
        assert target.read_bytes() == b"precious"

    def test_render_missing_lut(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (4, 4, 4)))
        target = tmp_path / "img.ppm"
        out = run_cli("render", "-i", str(path), "--lut", str(tmp_path / "nope.lut"),
                      "-o", str(target))
        assert out.returncode == 2
        assert not target.exists()


class TestRoundTripCommands:
    def test_raw_import(self, tmp_path):
        payload = bytes(range(64)) * 4  # 256 bytes = 8*8*4 u8 cells
        raw = tmp_path / "cells.raw"
        raw.write_bytes(payload)
        out = run_cli("raw-import", "--dims", "8", "8", "4", "--format", "u8",
                      "--range", "0", "1", "-i", str(raw))
        assert out.returncode == 0
        vol = vkt.volume_from_bytes(out.stdout)
        assert vol.data.to_bytes() == payload

    def test_resample_format_flags(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (8, 8, 8)))
        out = run_cli("resample", "--dims", "4", "4", "4", "--format", "f32",
                      "--range", "0", "2", "-i", str(path))
        vol = vkt.volume_from_bytes(out.stdout)
        assert vol.format is vkt.DataFormat.FLOAT32
        assert tuple(vol.dims) == (4, 4, 4)
        assert (vol.mapping.lo, vol.mapping.hi) == (0.0, 2.0)

    def test_decompose_writes_bricks(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        v = random_volume(rng, (4, 4, 4))
        vkt.write_volume(path, v)
        prefix = tmp_path / "brick_"
        out = run_cli("decompose", "--brick-size", "2", "2", "2",
                      "-i", str(path), "-o", str(prefix))
        assert out.returncode == 0
        files = sorted(tmp_path.glob("brick_*.vkt"))
        assert len(files) == 8
        merged = np.zeros_like(v.array())
        for line in out.stdout.decode().strip().splitlines():
            parts = line.split()
            ox, oy, oz = int(parts[2]), int(parts[3]), int(parts[4])
            brick = vkt.read_volume(parts[-1])
            d = brick.dims
            merged[oz:oz + d.z, oy:oy + d.y, ox:ox + d.x] = brick.array()
        assert np.array_equal(merged, v.array())

    def test_arith_cli(self, rng, tmp_path):
        a = random_volume(rng, (4, 4, 4))
        b = random_volume(rng, (4, 4, 4))
        pa, pb = tmp_path / "a.vkt", tmp_path / "b.vkt"
        vkt.write_volume(pa, a)
        vkt.write_volume(pb, b)
        out = run_cli("arith", "--op", "absdiff", "--with", str(pb), "-i", str(pa))
        got = vkt.volume_from_bytes(out.stdout)
        dest = a.copy()
        vkt.arithmetic(vkt.ArithmeticOp.ABS_DIFF, dest, a, b)
        assert got.data.to_bytes() == dest.data.to_bytes()

    def test_clahe_cli_matches_library(self, rng, tmp_path):
        v = random_volume(rng, (8, 8, 8))
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, v)
        out = run_cli("clahe", "--bricks", "2", "2", "2", "--bins", "32",
                      "--clip", "3.5", "-i", str(path))
        expected = v.copy()
        vkt.clahe_equalize(expected, vkt.ClaheParams((2, 2, 2), 32, 3.5))
        assert vkt.volume_from_bytes(out.stdout).data.to_bytes() == expected.data.to_bytes()


class TestRenderCommand:
    def test_render_writes_ppm(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (8, 8, 8)))
        lut = tmp_path / "lut.txt"
        lut.write_text("0 0 0 0\n1 0.5 0.2 0.9\n")
        target = tmp_path / "img.ppm"
        out = run_cli("render", "-i", str(path), "--lut", str(lut),
                      "--size", "16", "16", "--algo", "raymarch", "-o", str(target))
        assert out.returncode == 0, out.stderr
        payload = target.read_bytes()
        assert payload.startswith(b"P6\n16 16\n255\n")
        assert len(payload) == len(b"P6\n16 16\n255\n") + 16 * 16 * 3

    def test_render_pathtrace_deterministic_across_runs(self, rng, tmp_path):
        path = tmp_path / "v.vkt"
        vkt.write_volume(path, random_volume(rng, (8, 8, 8)))
        lut = tmp_path / "lut.txt"
        lut.write_text("0.1 0.2 0.3 0.2\n0.9 0.8 0.7 0.8\n")
        imgs = []
        for name in ("a.pfm", "b.pfm"):
            target = tmp_path / name
            out = run_cli("render", "-i", str(path), "--lut", str(lut),
                          "--algo", "pathtrace", "--spp", "2", "--seed", "7",
                          "--size", "8", "8", "-o", str(target))
            assert out.returncode == 0, out.stderr
            imgs.append(target.read_bytes())
        assert imgs[0] == imgs[1]


class TestZoom:
    def test_zoom_budget_and_values(self, tmp_path, rng):
        h = vkt.synthetic_hierarchical(16, seed=5)
        path = tmp_path / "h.vkt"
        vkt.write_volume(path, h)
        roi = (4, 4, 4, 28, 20, 12)
        cells = 4096
        out = run_cli("zoom", "--roi", *[str(v) for v in roi],
                      "--cells", str(cells), "-i", str(path))
        assert out.returncode == 0, out.stderr
        vol = vkt.volume_from_bytes(out.stdout)
        extent = np.array([24, 16, 8], dtype=np.float64)
        scale = (cells / extent.prod()) ** (1 / 3)
        expected_dims = np.floor(extent * scale + 0.5).astype(int)
        assert np.all(np.abs(np.array(vol.dims) - expected_dims) <= 1)
        # sampled values match basis interpolation of the cropped volume
        cropped = vkt.crop_hierarchical(h, vkt.box3i(roi[:3], roi[3:]))
        d = vol.dims
        probe = [(0, 0, 0), (d.x // 2, d.y // 2, d.z // 2), (d.x - 1, d.y - 1, d.z - 1)]
        for (i, j, k) in probe:
            p = (
                (i + 0.5) * cropped.logical_dims.x / d.x,
                (j + 0.5) * cropped.logical_dims.y / d.y,
                (k + 0.5) * cropped.logical_dims.z / d.z,
            )
            assert vol.get_value((i, j, k)) == pytest.approx(
                cropped.sample_basis(p), rel=1e-6, abs=1e-6
            )
