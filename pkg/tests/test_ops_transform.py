import math

import numpy as np
import pytest

import vkt
from vkt.errors import InvalidArgument

from conftest import index_stamped_volume, random_volume


class TestFlip:
    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_involution(self, rng, axis):
        v = random_volume(rng, (5, 4, 3), vkt.DataFormat.UINT16)
        before = v.data.to_bytes()
        vkt.flip(v, axis)
        assert v.data.to_bytes() != before
        vkt.flip(v, axis)
        assert v.data.to_bytes() == before

    def test_x_flip_permutes_stored_values(self):
        v = index_stamped_volume((4, 2, 2))
        expected = v.array()[:, :, ::-1].copy()
        vkt.flip(v, "x")
        assert np.array_equal(v.array(), expected)

    def test_single_cell_fixed_point(self):
        v = vkt.StructuredVolume((1, 1, 1), vkt.DataFormat.UINT8)
        v.set_value((0, 0, 0), 0.7)
        before = v.data.to_bytes()
        for axis in "xyz":
            vkt.flip(v, axis)
        assert v.data.to_bytes() == before

    def test_longest_axis_of_dns_shape(self):
        # mirrors the long axis of a 2560x1920x384-shaped grid, scaled down
        dims = (40, 30, 6)
        v = index_stamped_volume(dims)
        longest = "xyz"[int(np.argmax(dims))]
        assert longest == "x"
        expected = v.array()[:, :, ::-1].copy()
        vkt.flip(v, longest)
        assert np.array_equal(v.array(), expected)


class TestRotateRange:
    def test_zero_angle_fixed_point(self, rng):
        v = random_volume(rng, (6, 6, 6))
        before = v.data.to_bytes()
        vkt.rotate(v, (0, 0, 1), 0.0, (3, 3, 3))
        assert v.data.to_bytes() == before

    def test_full_turn_within_one_step(self, rng):
        v = random_volume(rng, (6, 6, 6))
        before = v.array().astype(np.int64)
        vkt.rotate(v, (0, 0, 1), 2 * math.pi, (3, 3, 3))
        assert np.max(np.abs(v.array().astype(np.int64) - before)) <= 1

    def test_quarter_turn_matches_permutation_oracle(self, rng):
        n = 8
        v = random_volume(rng, (n, n, n))
        before = v.array().astype(np.int64)
        vkt.rotate(v, (0, 0, 1), math.pi / 2, (n / 2, n / 2, n / 2))
        # dest (i, j, k) reads source (j, n-1-i, k) for an exact quarter turn
        expected = np.zeros_like(before)
        for j in range(n):
            for i in range(n):
                expected[:, j, i] = before[:, n - 1 - i, j]
        assert np.max(np.abs(v.array().astype(np.int64) - expected)) <= 1

    def test_touches_only_roi(self, rng):
        v = random_volume(rng, (8, 8, 8))
        before = v.array().copy()
        roi = vkt.box3i((0, 0, 0), (8, 8, 4))
        vkt.rotate_range(v, roi, (0, 0, 1), 0.3, (4, 4, 4))
        assert np.array_equal(v.array()[4:], before[4:])

    def test_non_unit_axis_rejected(self, rng):
        v = random_volume(rng, (4, 4, 4))
        with pytest.raises(InvalidArgument):
            vkt.rotate(v, (0, 0, 2), 0.5, (2, 2, 2))


class TestScaleRange:
    def test_identity_factors_fixed_point(self, rng):
        v = random_volume(rng, (6, 6, 6))
        before = v.data.to_bytes()
        vkt.scale(v, (1, 1, 1), (3, 3, 3))
        assert v.data.to_bytes() == before

    def test_constant_volume_any_factors(self):
        v = vkt.StructuredVolume((6, 6, 6), vkt.DataFormat.UINT8)
        vkt.fill(v, 0.5)
        vkt.scale(v, (2.0, 0.5, 3.0), (3, 3, 3))
        assert np.all(v.array() == 128)

    def test_double_zoom_probes_inverse_mapping(self):
        n = 8
        v = vkt.StructuredVolume((n, n, n), vkt.DataFormat.FLOAT32, mapping=(0, 1))
        # centered box pattern: ones inside [2,6)^3
        arr = v.array()
        arr[2:6, 2:6, 2:6] = 1.0
        snapshot = v.mapped_array()
        center = (n / 2.0,) * 3
        vkt.scale(v, (2.0, 2.0, 2.0), center)
        got = v.array()
        # 16 probe cells against hand-computed inverse positions
        probes = [
            (1, 1, 1), (2, 2, 2), (3, 3, 3), (4, 4, 4),
            (5, 5, 5), (6, 6, 6), (1, 4, 4), (6, 4, 4),
            (4, 1, 4), (4, 6, 4), (4, 4, 1), (4, 4, 6),
            (0, 0, 0), (7, 7, 7), (2, 4, 4), (5, 4, 4),
        ]
        for (i, j, k) in probes:
            src = tuple((c + 0.5 - n / 2.0) / 2.0 + n / 2.0 for c in (i, j, k))
            u = [min(max(src[a] - 0.5, 0.0), n - 1.0) for a in range(3)]
            i0 = [min(int(math.floor(u[a])), n - 2) for a in range(3)]
            f = [u[a] - i0[a] for a in range(3)]
            acc = 0.0
            for dz in (0, 1):
                for dy in (0, 1):
                    for dx in (0, 1):
                        wz = f[2] if dz else 1 - f[2]
                        wy = f[1] if dy else 1 - f[1]
                        wx = f[0] if dx else 1 - f[0]
                        acc += wx * wy * wz * snapshot[i0[2] + dz, i0[1] + dy, i0[0] + dx]
            assert float(got[k, j, i]) == pytest.approx(acc, abs=1e-6)

    def test_nonpositive_factor_rejected(self, rng):
        v = random_volume(rng, (4, 4, 4))
        with pytest.raises(InvalidArgument):
            vkt.scale(v, (0.0, 1, 1), (2, 2, 2))
