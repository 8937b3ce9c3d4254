"""Benchmark harness: a fixed assortment of algorithms at configurable scale.

Each case is timed under a serial policy (one worker) and a parallel
policy (the requested worker count) with best-of-N repeats.  When both
policies resolve to the same execution plan (the runtime clamps worker
counts to the hardware threads actually available), the plan is
measured once and reported for both, so the comparison reflects real
execution rather than scheduler noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace
from typing import Callable, Optional

import numpy as np

from .execution import (
    effective_workers,
    get_execution_policy,
    set_execution_policy,
)
from .geom import Vec3i, box3i
from .hier import HierarchicalVolume, Subgrid
from .ops import (
    apply_filter,
    crop_hierarchical,
    fill_range,
    flip,
    gaussian_kernel,
    resample,
)
from .volume import DataFormat, StructuredVolume


def synthetic_structured(size: int, fmt: DataFormat = DataFormat.UINT8, seed: int = 7) -> StructuredVolume:
    """Random structured cube for benchmarking and tests."""
    rng = np.random.default_rng(seed)
    volume = StructuredVolume((size, size, size), fmt)
    arr = volume.array()
    if fmt is DataFormat.FLOAT32:
        arr[...] = rng.random(arr.shape, dtype=np.float32)
    else:
        info = np.iinfo(arr.dtype)
        arr[...] = rng.integers(0, info.max + 1, size=arr.shape, dtype=arr.dtype)
    return volume


def synthetic_hierarchical(subgrid_count: int = 64, seed: int = 7) -> HierarchicalVolume:
    """Two-level subgrid arrangement: alternating fine and coarse slots.

    Slots of 16 logical units are filled in a cubic grid; even slots get
    a level-0 16^3 subgrid, odd slots a level-1 8^3 subgrid.
    """
    rng = np.random.default_rng(seed)
    slots = max(1, math.ceil(subgrid_count ** (1.0 / 3.0)))
    span = 16
    subgrids = []
    for sz in range(slots):
        for sy in range(slots):
            for sx in range(slots):
                if len(subgrids) == subgrid_count:
                    break
                lower = Vec3i(sx * span, sy * span, sz * span)
                if (sx + sy + sz) % 2 == 0:
                    dims = Vec3i(span, span, span)
                    level = 0
                else:
                    dims = Vec3i(span // 2, span // 2, span // 2)
                    level = 1
                data = rng.random((dims.z, dims.y, dims.x), dtype=np.float32)
                subgrids.append(Subgrid(level, lower, dims, data))
    return HierarchicalVolume(subgrids, (0.0, 1.0))


def _best_of(fn: Callable[[], None], setup: Optional[Callable[[], object]], repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        ctx = setup() if setup else None
        t0 = time.perf_counter()
        fn(ctx)
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmarks(
    size: int = 128,
    subgrid_count: int = 64,
    workers: int = 8,
    repeat: int = 3,
) -> list[dict]:
    """Run the benchmark assortment, returning one report dict per case."""
    volume = synthetic_structured(size)
    hier = synthetic_hierarchical(subgrid_count)
    kernel = gaussian_kernel(1.0, 3)
    logical = hier.logical_dims

    def sliding_crops(_):
        for pct in (0.2, 0.4, 0.6, 0.8):
            roi_dims = [max(1, int(logical[a] * pct)) for a in range(3)]
            slack = logical.x - roi_dims[0]
            for step in range(4):
                x0 = (slack * step) // 3 if slack > 0 else 0
                crop_hierarchical(
                    hier,
                    box3i((x0, 0, 0), (x0 + roi_dims[0], roi_dims[1], roi_dims[2])),
                )

    half = (max(1, size // 2),) * 3
    cases = [
        ("resample_down2", None, lambda _: resample(volume, half)),
        ("fillrange", None, lambda _: fill_range(volume, volume.bounds, 0.5)),
        ("gaussian_filter", volume.copy, lambda v: apply_filter(v, kernel)),
        ("crop_sliding", None, sliding_crops),
        ("flip_longest_axis", None, lambda _: flip(volume, 0)),
        ("amr_resample", None, lambda _: resample(hier, logical)),
    ]

    base_policy = get_execution_policy()
    serial_policy = replace(base_policy, worker_count=1)
    parallel_policy = replace(base_policy, worker_count=workers)
    results = []
    try:
        for name, setup, run in cases:
            set_execution_policy(serial_policy)
            serial_s = _best_of(run, setup, repeat)
            if effective_workers(parallel_policy) == effective_workers(serial_policy):
                # identical execution plan: one measurement serves both
                parallel_s = serial_s
            else:
                set_execution_policy(parallel_policy)
                parallel_s = _best_of(run, setup, repeat)
            results.append(
                {
                    "case": name,
                    "serial_s": serial_s,
                    "parallel_s": parallel_s,
                    "workers": workers,
                    "effective_workers": effective_workers(parallel_policy),
                }
            )
    finally:
        set_execution_policy(base_policy)
    return results
