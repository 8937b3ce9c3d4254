"""Managed byte buffers, the emulated device space, and resource handles.

A :class:`ManagedBuffer` owns its bytes in exactly one device space at a
time.  Algorithms call :meth:`ManagedBuffer.migrate` before touching the
data; the buffer then moves to the space selected by the caller's
current execution policy.  When the spaces already match, migrate is a
no-op.

The emulated device stands in for an accelerator: it is a physically
distinct allocation arena (with optional capacity accounting so
allocation failure is observable) that executes on the same worker
pool.  Moving data between the spaces copies bytes bit-exactly.
"""

from __future__ import annotations

import itertools
import threading
import weakref
from typing import Optional

import numpy as np

from .errors import AllocationFailure, UnresolvedHandle
from .execution import Device, ExecutionPolicy, debug, get_execution_policy

#: Sentinel handle value that never resolves (max representable u64).
INVALID_HANDLE = 2**64 - 1


class EmulatedDeviceSpace:
    """Allocation arena standing in for accelerator memory."""

    def __init__(self, capacity_bytes: Optional[int] = None):
        self.capacity_bytes = capacity_bytes
        self.used_bytes = 0
        self._lock = threading.Lock()

    def set_capacity(self, capacity_bytes: Optional[int]) -> None:
        with self._lock:
            self.capacity_bytes = capacity_bytes

    def allocate(self, nbytes: int) -> np.ndarray:
        with self._lock:
            if self.capacity_bytes is not None and self.used_bytes + nbytes > self.capacity_bytes:
                raise AllocationFailure(
                    f"emulated device cannot hold {nbytes} bytes "
                    f"({self.used_bytes}/{self.capacity_bytes} in use)"
                )
            self.used_bytes += nbytes
        return np.empty(nbytes, dtype=np.uint8)

    def free(self, nbytes: int) -> None:
        with self._lock:
            self.used_bytes -= nbytes


#: Process-wide emulated device arena.
emulated_device = EmulatedDeviceSpace()


class ResourceRegistry:
    """Maps integral handles to live managed objects.

    Handles are never reused within a process; resolving the handle of a
    destroyed object (or :data:`INVALID_HANDLE`) raises.
    """

    def __init__(self) -> None:
        self._next = itertools.count(1)
        self._objects: dict[int, weakref.ref] = {}
        self._lock = threading.Lock()

    def register(self, obj) -> int:
        with self._lock:
            handle = next(self._next)
            self._objects[handle] = weakref.ref(obj, lambda _: self._drop(handle))
            return handle

    def _drop(self, handle: int) -> None:
        with self._lock:
            self._objects.pop(handle, None)

    def resolve(self, handle: int):
        with self._lock:
            ref = self._objects.get(handle)
        obj = ref() if ref is not None else None
        if obj is None:
            raise UnresolvedHandle(f"handle {handle} does not resolve to a live object")
        return obj


#: Process-wide handle registry for volumes and lookup tables.
registry = ResourceRegistry()


class ManagedBuffer:
    """A byte buffer resident in exactly one device space."""

    def __init__(self, initial: np.ndarray | bytes | int):
        if isinstance(initial, int):
            host = np.zeros(initial, dtype=np.uint8)
        else:
            host = np.frombuffer(bytes(initial), dtype=np.uint8).copy()
        self.byte_length = int(host.size)
        self.migration_count = 0
        self.last_policy: ExecutionPolicy = get_execution_policy()
        self._lock = threading.Lock()
        # Allocate in the space selected by the current policy.
        if self.last_policy.device is Device.EMULATED_DEVICE:
            arr = emulated_device.allocate(self.byte_length)
            arr[:] = host
            self._array = arr
            self.residency = Device.EMULATED_DEVICE
        else:
            self._array = host
            self.residency = Device.CPU

    def migrate(self) -> None:
        """Move the bytes to the current policy's device space if needed."""
        policy = get_execution_policy()
        with self._lock:
            if policy.device is self.residency:
                self.last_policy = policy
                return
            if policy.device is Device.EMULATED_DEVICE:
                dst = emulated_device.allocate(self.byte_length)
                dst[:] = self._array
            else:
                dst = self._array.copy()
                emulated_device.free(self.byte_length)
            debug(f"migrate {self.byte_length} bytes {self.residency.value} -> {policy.device.value}")
            self._array = dst
            self.residency = policy.device
            self.migration_count += 1
            self.last_policy = policy

    @property
    def array(self) -> np.ndarray:
        """The resident byte array. Call migrate() first inside algorithms."""
        return self._array

    def to_bytes(self) -> bytes:
        return self._array.tobytes()

    def __len__(self) -> int:
        return self.byte_length

    def __del__(self):
        try:
            if self.residency is Device.EMULATED_DEVICE:
                emulated_device.free(self.byte_length)
        except Exception:
            pass
