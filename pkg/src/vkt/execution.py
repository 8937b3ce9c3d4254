"""Execution policies, worker pools, and deterministic parallel helpers.

Each thread of control carries its own :class:`ExecutionPolicy` (stored
thread-locally) that selects the device space and the worker-count upper
bound for subsequent algorithm invocations.  Algorithm results never
depend on the worker count: data-parallel kernels partition their work
into fixed-shape blocks and reductions combine block partials in a
balanced binary tree over the block order, so serial and parallel runs
produce bit-identical output.

The worker count is an upper bound on concurrency.  The pool clamps it
to the hardware threads actually available to the process, because
oversubscribing a CPU-bound kernel only adds scheduling overhead and,
by the fixed-shape blocking above, cannot change any result.
"""

from __future__ import annotations

import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from functools import wraps
from typing import Callable, Optional, Sequence, TypeVar

T = TypeVar("T")


class Device(Enum):
    CPU = "cpu"
    EMULATED_DEVICE = "emulated"


@dataclass(frozen=True)
class ExecutionPolicy:
    """Per-context algorithm settings.

    worker_count 0 means "auto" (all available hardware threads).
    """

    device: Device = Device.CPU
    worker_count: int = 0
    print_timings: bool = False
    debug_messages: bool = False

    def __post_init__(self) -> None:
        if self.worker_count < 0:
            raise ValueError("worker_count must be >= 0")


_tls = threading.local()
_DEFAULT_POLICY = ExecutionPolicy()


def set_execution_policy(policy: ExecutionPolicy) -> None:
    """Install `policy` for the calling thread of control."""
    _tls.policy = policy


def get_execution_policy() -> ExecutionPolicy:
    """Policy last set on this thread, or the CPU default."""
    return getattr(_tls, "policy", _DEFAULT_POLICY)


_hw_override: Optional[int] = None


def set_hardware_concurrency_override(n: Optional[int]) -> None:
    """Pretend `n` hardware threads are available (None restores reality).

    Diagnostic hook: lets tests drive the threaded dispatch path on
    machines with fewer cores.  Results are unaffected either way.
    """
    global _hw_override
    if n is not None and n < 1:
        raise ValueError("hardware concurrency must be >= 1")
    _hw_override = n


def hardware_concurrency() -> int:
    if _hw_override is not None:
        return _hw_override
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def effective_workers(policy: Optional[ExecutionPolicy] = None) -> int:
    """Concurrency degree a kernel will actually run with under `policy`."""
    if policy is None:
        policy = get_execution_policy()
    requested = policy.worker_count or hardware_concurrency()
    return max(1, min(requested, hardware_concurrency()))


_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


def _pool(workers: int) -> ThreadPoolExecutor:
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="vkt")
            _pools[workers] = pool
        return pool


def parallel_for(n_tasks: int, fn: Callable[[int], None]) -> None:
    """Run fn(0..n_tasks-1); tasks must write to disjoint state.

    Dispatches to the worker pool when the current policy allows more
    than one worker, otherwise runs inline.  The task decomposition is
    chosen by the caller and must not depend on the worker count.
    """
    workers = effective_workers()
    if workers <= 1 or n_tasks <= 1:
        for i in range(n_tasks):
            fn(i)
        return
    # Propagate the caller's policy into pool threads so nested queries
    # (e.g. migrate inside a task) observe the same settings.
    policy = get_execution_policy()

    def run(i: int) -> None:
        set_execution_policy(policy)
        fn(i)

    list(_pool(workers).map(run, range(n_tasks)))


def map_blocks(n_blocks: int, fn: Callable[[int], T]) -> list[T]:
    """fn over block indices, results in block order regardless of scheduling."""
    results: list = [None] * n_blocks
    parallel_for(n_blocks, lambda i: results.__setitem__(i, fn(i)))
    return results


def pairwise_reduce(items: Sequence[T], combine: Callable[[T, T], T]) -> T:
    """Balanced binary-tree reduction in item order.

    The tree shape depends only on len(items), which makes float
    reductions reproducible across worker counts.
    """
    if not items:
        raise ValueError("pairwise_reduce needs at least one item")
    level = list(items)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(combine(level[i], level[i + 1]))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def slab_ranges(extent: int, max_blocks: int = 64, min_thickness: int = 4) -> list[tuple[int, int]]:
    """Deterministic z-slab decomposition of `extent` rows.

    Depends only on the extent, never on the worker count.
    """
    if extent <= 0:
        return []
    thickness = max(min_thickness, -(-extent // max_blocks))
    return [(lo, min(extent, lo + thickness)) for lo in range(0, extent, thickness)]


def debug(msg: str) -> None:
    if get_execution_policy().debug_messages:
        print(f"[vkt] {msg}", file=sys.stderr)


def timed(name: str):
    """Report wall time of the wrapped algorithm when the policy asks for it."""

    def deco(fn):
        @wraps(fn)
        def wrapper(*args, **kwargs):
            policy = get_execution_policy()
            if not policy.print_timings:
                return fn(*args, **kwargs)
            t0 = time.perf_counter()
            try:
                return fn(*args, **kwargs)
            finally:
                dt = time.perf_counter() - t0
                print(f"[vkt] {name}: {dt:.6f} s", file=sys.stderr)

        return wrapper

    return deco


def with_policy(**changes) -> ExecutionPolicy:
    """Copy of the current policy with fields replaced (not installed)."""
    return replace(get_execution_policy(), **changes)
