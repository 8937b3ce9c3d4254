import numpy as np
import pytest

import vkt


@pytest.fixture(autouse=True)
def reset_policy():
    """Each test starts from the default CPU policy and unlimited device heap."""
    vkt.set_execution_policy(vkt.ExecutionPolicy())
    vkt.emulated_device.set_capacity(None)
    vkt.set_hardware_concurrency_override(None)
    yield
    vkt.set_execution_policy(vkt.ExecutionPolicy())
    vkt.emulated_device.set_capacity(None)
    vkt.set_hardware_concurrency_override(None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_volume(rng, dims, fmt=vkt.DataFormat.UINT8, mapping=(0.0, 1.0)):
    v = vkt.StructuredVolume(dims, fmt, (1.0, 1.0, 1.0), mapping)
    arr = v.array()
    if fmt is vkt.DataFormat.FLOAT32:
        arr[...] = rng.random(arr.shape, dtype=np.float32)
    else:
        info = np.iinfo(arr.dtype)
        arr[...] = rng.integers(0, info.max + 1, size=arr.shape, dtype=arr.dtype)
    return v


def index_stamped_volume(dims, mapping=None):
    """Float volume whose cell value equals its x-fastest linear index."""
    x, y, z = dims
    n = x * y * z
    v = vkt.StructuredVolume(dims, vkt.DataFormat.FLOAT32, (1, 1, 1),
                             mapping or (0.0, float(max(n, 2))))
    v.array()[...] = np.arange(n, dtype=np.float32).reshape(z, y, x)
    return v


def two_level_fixture(rng, value_fn=None):
    """One level-1 subgrid abutting one level-0 subgrid along x."""
    a = vkt.Subgrid(1, (0, 0, 0), (4, 4, 4),
                    rng.random((4, 4, 4), dtype=np.float32))
    b = vkt.Subgrid(0, (8, 0, 0), (8, 8, 8),
                    rng.random((8, 8, 8), dtype=np.float32))
    return vkt.HierarchicalVolume([a, b], (0.0, 1.0))
