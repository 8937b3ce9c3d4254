import numpy as np
import pytest

import vkt
from vkt.errors import EmptyRange, InvalidArgument

from conftest import index_stamped_volume, random_volume
from oracles import aggregates_oracle, histogram_oracle


class TestAggregates:
    def test_constant_half_uint8(self):
        v = vkt.StructuredVolume((8, 8, 8), vkt.DataFormat.UINT8)
        vkt.fill(v, 0.5)
        agg = vkt.compute_aggregates(v)
        assert agg.min == agg.max == pytest.approx(128 / 255)
        assert agg.stddev == 0.0

    def test_index_stamped_extremes_and_mean(self):
        v = index_stamped_volume((4, 4, 4))
        agg = vkt.compute_aggregates(v)
        assert agg.argmin == vkt.Vec3i(0, 0, 0)
        assert agg.argmax == vkt.Vec3i(3, 3, 3)
        assert agg.mean == pytest.approx(31.5)

    def test_matches_scalar_oracle(self, rng):
        v = random_volume(rng, (16, 16, 16), vkt.DataFormat.FLOAT32)
        agg = vkt.compute_aggregates(v)
        scan = v.mapped_array().reshape(-1)  # (z,y,x) C-order == x-fastest scan
        vmin, imin, vmax, imax, mean, stddev = aggregates_oracle(scan)
        assert agg.min == vmin and agg.max == vmax
        k, rem = divmod(imin, 16 * 16)
        j, i = divmod(rem, 16)
        assert agg.argmin == vkt.Vec3i(i, j, k)
        k, rem = divmod(imax, 16 * 16)
        j, i = divmod(rem, 16)
        assert agg.argmax == vkt.Vec3i(i, j, k)
        assert agg.mean == pytest.approx(mean, rel=1e-6)
        assert agg.stddev == pytest.approx(stddev, rel=1e-6)

    def test_duplicate_minimum_keeps_first_scan_position(self):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.FLOAT32)
        vkt.fill(v, 5.0)
        v.set_value((2, 1, 0), -1.0)
        v.set_value((1, 2, 3), -1.0)  # later in scan order
        agg = vkt.compute_aggregates(v)
        assert agg.argmin == vkt.Vec3i(2, 1, 0)

    def test_roi_restriction(self):
        v = index_stamped_volume((4, 4, 4))
        agg = vkt.compute_aggregates_range(v, vkt.box3i((1, 1, 1), (3, 3, 3)))
        assert agg.min == v.get_value((1, 1, 1))
        assert agg.max == v.get_value((2, 2, 2))
        assert agg.argmin == vkt.Vec3i(1, 1, 1)

    def test_empty_roi_rejected(self, rng):
        v = random_volume(rng, (4, 4, 4))
        with pytest.raises(EmptyRange):
            vkt.compute_aggregates_range(v, vkt.box3i((9, 9, 9), (12, 12, 12)))

    def test_hierarchical_counts_each_cell_once(self, rng):
        h = vkt.synthetic_hierarchical(5, seed=8)
        agg = vkt.compute_aggregates(h)
        vals = np.concatenate(
            [h.subgrid_data(i).reshape(-1) for i in range(h.subgrid_count)]
        ).astype(np.float64)
        assert agg.min == vals.min()
        assert agg.max == vals.max()
        assert agg.mean == pytest.approx(vals.mean(), rel=1e-9)

    def test_hierarchical_empty_roi(self):
        # level-1 cells are 2 logical units wide; a unit box contains none
        h = vkt.create_hierarchical_volume([vkt.Subgrid(1, (0, 0, 0), (4, 4, 4))], (0, 1))
        with pytest.raises(EmptyRange):
            vkt.compute_aggregates_range(h, vkt.box3i((0, 0, 0), (1, 1, 1)))


class TestHistogram:
    def test_constant_volume_single_bin(self):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.UINT8)
        vkt.fill(v, 0.3)
        hist = vkt.compute_histogram(v, 16)
        assert hist.counts.sum() == 64
        assert (hist.counts > 0).sum() == 1

    def test_value_one_lands_in_last_bin(self):
        v = vkt.StructuredVolume((1, 1, 1), vkt.DataFormat.FLOAT32)
        v.set_value((0, 0, 0), 1.0)
        hist = vkt.compute_histogram(v, 10)
        assert hist.counts[-1] == 1

    def test_uniform_ramp_equal_bins(self):
        v = vkt.StructuredVolume((256, 1, 1), vkt.DataFormat.UINT8)
        v.array()[0, 0, :] = np.arange(256, dtype=np.uint8)
        hist = vkt.compute_histogram(v, 256)
        assert np.all(hist.counts == 1)

    def test_matches_scalar_oracle(self, rng):
        v = random_volume(rng, (8, 8, 8), vkt.DataFormat.UINT16, mapping=(-2.0, 5.0))
        hist = vkt.compute_histogram(v, 13)
        expected = histogram_oracle(v.mapped_array(), -2.0, 5.0, 13)
        assert np.array_equal(hist.counts, expected)

    def test_mass_conservation_random_rois(self, rng):
        v = random_volume(rng, (8, 8, 8))
        for _ in range(10):
            lo = rng.integers(0, 7, size=3)
            hi = lo + rng.integers(1, 8 - lo.max(), size=3) if lo.max() < 7 else lo + 1
            roi = vkt.box3i(tuple(int(x) for x in lo), tuple(int(x) for x in hi))
            hist = vkt.compute_histogram_range(v, roi, 7)
            assert hist.counts.sum() == roi.cell_count

    def test_bin_count_validation(self, rng):
        v = random_volume(rng, (2, 2, 2))
        with pytest.raises(InvalidArgument):
            vkt.compute_histogram(v, 0)

    def test_hierarchical_histogram_mass(self):
        h = vkt.synthetic_hierarchical(9, seed=4)
        hist = vkt.compute_histogram(h, 32)
        assert hist.counts.sum() == h.cell_count


class TestBrickDecompose:
    def test_single_brick_identity(self, rng):
        v = random_volume(rng, (4, 4, 4))
        bricks = vkt.brick_decompose(v, (4, 4, 4))
        assert len(bricks) == 1
        offset, brick = bricks[0]
        assert offset == vkt.Vec3i(0, 0, 0)
        assert brick.data.to_bytes() == v.data.to_bytes()

    def test_eight_bricks_reassemble(self, rng):
        v = random_volume(rng, (4, 4, 4), vkt.DataFormat.UINT16)
        bricks = vkt.brick_decompose(v, (2, 2, 2))
        assert len(bricks) == 8
        out = np.zeros_like(v.array())
        for offset, brick in bricks:
            d = brick.dims
            out[offset.z:offset.z + d.z, offset.y:offset.y + d.y, offset.x:offset.x + d.x] = brick.array()
        assert np.array_equal(out, v.array())

    def test_brick_order_is_x_fastest(self, rng):
        v = random_volume(rng, (4, 4, 2))
        bricks = vkt.brick_decompose(v, (2, 2, 2))
        offsets = [tuple(o) for o, _ in bricks]
        assert offsets == [(0, 0, 0), (2, 0, 0), (0, 2, 0), (2, 2, 0)]

    def test_uneven_tail_bricks(self, rng):
        v = random_volume(rng, (5, 4, 3))
        bricks = vkt.brick_decompose(v, (2, 2, 2))
        assert len(bricks) == 3 * 2 * 2
        tail = [b for o, b in bricks if o.x == 4]
        assert all(b.dims.x == 1 for b in tail)

    def test_halo_ghost_cells(self):
        v = index_stamped_volume((4, 4, 4))
        src = v.array()
        bricks = vkt.brick_decompose(v, (2, 2, 2), (1, 1, 1), (1, 1, 1))
        for offset, brick in bricks:
            arr = brick.array()
            assert tuple(brick.dims) == (4, 4, 4)
            for (dz, dy, dx), val in np.ndenumerate(arr):
                sz = min(max(offset.z + dz - 1, 0), 3)
                sy = min(max(offset.y + dy - 1, 0), 3)
                sx = min(max(offset.x + dx - 1, 0), 3)
                assert val == src[sz, sy, sx]

    def test_reassembly_after_halo_strip(self, rng):
        v = random_volume(rng, (6, 5, 4))
        bricks = vkt.brick_decompose(v, (4, 3, 2), (2, 1, 1), (1, 2, 1))
        out = np.zeros_like(v.array())
        for offset, brick in bricks:
            arr = brick.array()[1:, 1:, 2:]  # strip halo_low
            core = np.minimum(
                np.array([4, 3, 2]), np.array(v.dims) - np.array(offset)
            )
            arr = arr[: core[2], : core[1], : core[0]]
            out[
                offset.z : offset.z + core[2],
                offset.y : offset.y + core[1],
                offset.x : offset.x + core[0],
            ] = arr
        assert np.array_equal(out, v.array())

    def test_validation(self, rng):
        v = random_volume(rng, (4, 4, 4))
        with pytest.raises(InvalidArgument):
            vkt.brick_decompose(v, (0, 2, 2))
        with pytest.raises(InvalidArgument):
            vkt.brick_decompose(v, (2, 2, 2), (-1, 0, 0))
