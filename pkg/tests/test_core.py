import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vkt
from vkt.errors import (
    AllocationFailure,
    IndexOutOfRange,
    InvalidArgument,
    UnresolvedHandle,
)

from conftest import random_volume
from oracles import mapped_value, quantized_value, trilinear_oracle


class TestExecutionPolicy:
    def test_set_get_round_trip(self):
        policy = vkt.ExecutionPolicy(vkt.Device.CPU, 1, False, False)
        vkt.set_execution_policy(policy)
        assert vkt.get_execution_policy() == policy

    def test_fresh_context_returns_default(self):
        seen = {}

        def worker():
            seen["policy"] = vkt.get_execution_policy()

        t = threading.Thread(target=worker)
        t.start()
        t.join()
        assert seen["policy"] == vkt.ExecutionPolicy()
        assert seen["policy"].device is vkt.Device.CPU
        assert seen["policy"].worker_count == 0

    def test_fill_under_emulated_policy_moves_residency(self):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.UINT8)
        assert v.data.residency is vkt.Device.CPU
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.EMULATED_DEVICE))
        vkt.fill(v, 1.0)
        assert v.data.residency is vkt.Device.EMULATED_DEVICE

    def test_policy_isolation_across_threads(self):
        results = {}
        barrier = threading.Barrier(2)

        def worker(name, workers):
            vkt.set_execution_policy(vkt.ExecutionPolicy(worker_count=workers))
            barrier.wait()
            results[name] = vkt.get_execution_policy().worker_count

        threads = [
            threading.Thread(target=worker, args=("a", 3)),
            threading.Thread(target=worker, args=("b", 5)),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results == {"a": 3, "b": 5}


class TestMigrate:
    def test_noop_when_spaces_match(self):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.UINT8)
        before = v.data.migration_count
        v.data.migrate()
        assert v.data.migration_count == before

    def test_cpu_to_emulated_copies_bytes(self, rng):
        v = random_volume(rng, (4, 4, 4))
        payload = v.data.to_bytes()
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.EMULATED_DEVICE))
        v.data.migrate()
        assert v.data.migration_count == 1
        assert v.data.residency is vkt.Device.EMULATED_DEVICE
        assert v.data.to_bytes() == payload

    def test_second_migrate_under_same_policy_is_noop(self):
        v = vkt.StructuredVolume((4, 4, 4), vkt.DataFormat.UINT8)
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.EMULATED_DEVICE))
        v.data.migrate()
        v.data.migrate()
        assert v.data.migration_count == 1

    def test_round_trip_bytes_identical(self, rng):
        v = random_volume(rng, (5, 3, 2), vkt.DataFormat.UINT16)
        payload = v.data.to_bytes()
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.EMULATED_DEVICE))
        v.data.migrate()
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.CPU))
        v.data.migrate()
        assert v.data.migration_count == 2
        assert v.data.to_bytes() == payload

    def test_allocation_failure_when_capacity_exceeded(self):
        v = vkt.StructuredVolume((16, 16, 16), vkt.DataFormat.FLOAT32)
        vkt.emulated_device.set_capacity(1024)
        vkt.set_execution_policy(vkt.ExecutionPolicy(device=vkt.Device.EMULATED_DEVICE))
        with pytest.raises(AllocationFailure):
            v.data.migrate()
        # failed migration leaves the buffer usable on the CPU
        assert v.data.residency is vkt.Device.CPU


class TestCreateVolume:
    def test_fig_session_shape(self):
        v = vkt.create_structured_volume((64, 64, 64), vkt.DataFormat.UINT8, (1, 1, 1), (0, 1))
        assert v.data.byte_length == 262144
        assert v.get_value((0, 0, 0)) == 0.0
        assert v.get_value((63, 63, 63)) == 0.0

    def test_single_cell_volume(self):
        v = vkt.create_structured_volume((1, 1, 1), vkt.DataFormat.FLOAT32)
        assert v.cell_count == 1

    def test_zero_dims_rejected(self):
        with pytest.raises(InvalidArgument):
            vkt.create_structured_volume((0, 4, 4), vkt.DataFormat.UINT8)

    def test_bad_cell_size_rejected(self):
        with pytest.raises(InvalidArgument):
            vkt.create_structured_volume((4, 4, 4), vkt.DataFormat.UINT8, (0.0, 1, 1))

    def test_degenerate_mapping_rejected(self):
        with pytest.raises(InvalidArgument):
            vkt.create_structured_volume((4, 4, 4), vkt.DataFormat.UINT8, (1, 1, 1), (1.0, 1.0))


class TestValueMapping:
    def test_uint8_max_maps_to_hi(self):
        v = vkt.StructuredVolume((2, 2, 2), vkt.DataFormat.UINT8, mapping=(0, 1))
        v.array()[0, 0, 0] = 255
        assert v.get_value((0, 0, 0)) == 1.0

    def test_uint8_half_quantization(self):
        v = vkt.StructuredVolume((2, 2, 2), vkt.DataFormat.UINT8, mapping=(0, 1))
        v.set_value((1, 1, 1), 0.5)
        assert v.array()[1, 1, 1] == 128
        assert v.get_value((1, 1, 1)) == pytest.approx(128 / 255)

    def test_float32_stores_verbatim_without_clamp(self):
        v = vkt.StructuredVolume((2, 2, 2), vkt.DataFormat.FLOAT32, mapping=(0, 1))
        v.set_value((0, 1, 0), 2.5)
        assert v.get_value((0, 1, 0)) == 2.5

    def test_out_of_range_index(self):
        v = vkt.StructuredVolume((2, 2, 2), vkt.DataFormat.UINT8)
        with pytest.raises(IndexOutOfRange):
            v.get_value((2, 0, 0))
        with pytest.raises(IndexOutOfRange):
            v.set_value((0, -1, 0), 1.0)

    @given(stored=st.integers(0, 255), lo=st.floats(-10, 5), width=st.floats(0.25, 20))
    @settings(max_examples=60, deadline=None)
    def test_quantization_fixed_point_uint8(self, stored, lo, width):
        hi = lo + width
        got = mapped_value(stored, 255, lo, hi)
        requant = quantized_value(got, 255, lo, hi)
        assert requant == stored

    def test_set_get_idempotent_after_one_round_trip(self, rng):
        v = random_volume(rng, (4, 4, 4), vkt.DataFormat.UINT16, mapping=(-2.0, 3.0))
        first = v.mapped_array().copy()
        for idx in np.ndindex(4, 4, 4):
            k, j, i = idx
            v.set_value((i, j, k), float(first[k, j, i]))
        assert np.array_equal(v.mapped_array(), first)


class TestSampleLinear:
    def test_constant_volume_everywhere(self, rng):
        v = vkt.StructuredVolume((5, 4, 3), vkt.DataFormat.FLOAT32)
        vkt.fill(v, 0.75)
        for p in rng.uniform(-2, 8, size=(20, 3)):
            assert v.sample_linear(tuple(p)) == pytest.approx(0.75)

    def test_cell_center_returns_cell_value(self, rng):
        v = random_volume(rng, (4, 4, 4), vkt.DataFormat.FLOAT32)
        m = v.mapped_array()
        assert v.sample_linear((1.5, 2.5, 3.5)) == m[3, 2, 1]

    def test_midpoint_between_centers_averages(self):
        v = vkt.StructuredVolume((2, 1, 1), vkt.DataFormat.FLOAT32)
        v.array()[0, 0, :] = [1.0, 3.0]
        assert v.sample_linear((1.0, 0.5, 0.5)) == pytest.approx(2.0)

    def test_matches_scalar_oracle(self, rng):
        v = random_volume(rng, (5, 6, 4), vkt.DataFormat.FLOAT32)
        grid = v.mapped_array()
        pts = rng.uniform(-1.0, 7.0, size=(50, 3))
        got = v.sample_linear_many(pts)
        for n in range(50):
            assert got[n] == pytest.approx(
                trilinear_oracle(grid, (1.0, 1.0, 1.0), pts[n]), abs=1e-12
            )

    def test_anisotropic_cell_size(self, rng):
        v = random_volume(rng, (4, 4, 4), vkt.DataFormat.FLOAT32)
        v.cell_size = vkt.Vec3f(2.0, 0.5, 1.0)
        grid = v.mapped_array()
        p = (3.1, 0.9, 2.2)
        assert v.sample_linear(p) == pytest.approx(
            trilinear_oracle(grid, (2.0, 0.5, 1.0), p), abs=1e-12
        )


class TestHandles:
    def test_resolution_returns_registered_object(self):
        lut = vkt.LookupTable(3, np.zeros((3, 4)))
        assert vkt.registry.resolve(lut.resource_handle) is lut

    def test_invalid_handle_fails(self):
        with pytest.raises(UnresolvedHandle):
            vkt.registry.resolve(vkt.INVALID_HANDLE)

    def test_handles_never_reused(self):
        a = vkt.StructuredVolume((1, 1, 1), vkt.DataFormat.UINT8)
        first = a.resource_handle
        del a
        b = vkt.StructuredVolume((1, 1, 1), vkt.DataFormat.UINT8)
        assert b.resource_handle > first

    def test_destroyed_object_stops_resolving(self):
        v = vkt.StructuredVolume((1, 1, 1), vkt.DataFormat.UINT8)
        handle = v.resource_handle
        del v
        with pytest.raises(UnresolvedHandle):
            vkt.registry.resolve(handle)


class TestLookupTable:
    def test_two_entry_interpolation(self):
        lut = vkt.LookupTable(2, [[0, 0, 0, 0], [1, 1, 1, 1]])
        assert lut.classify(0.0) == (0, 0, 0, 0)
        assert lut.classify(1.0) == (1, 1, 1, 1)
        assert lut.classify(0.5) == (0.5, 0.5, 0.5, 0.5)

    def test_quarter_hits_index_one_of_five(self):
        rows = np.arange(20, dtype=np.float32).reshape(5, 4)
        lut = vkt.LookupTable(5, rows)
        assert lut.classify(0.25) == tuple(rows[1])

    def test_clamp_below_range(self):
        rows = np.arange(8, dtype=np.float32).reshape(2, 4)
        lut = vkt.LookupTable(2, rows)
        assert lut.classify(-0.5) == tuple(rows[0])

    def test_rejects_non_linear_shape(self):
        with pytest.raises(InvalidArgument):
            vkt.LookupTable((4, 2, 1))
