import numpy as np
import pytest

from flashbitops.config import default_config
from flashbitops.nand_device import NandDevice


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def small_cfg(cfg):
    """Config with a small page so device tests stay fast (treat as read-only)."""
    out = dict(cfg)
    out["device"] = {"blocks": 8, "wordlines_per_block": 16, "page_size_bytes": 2048}
    return out


@pytest.fixture()
def device(small_cfg):
    return NandDevice.from_config(small_cfg, rng=np.random.default_rng(1234))


def random_page(rng, n):
    return rng.integers(0, 2, n, dtype=np.uint8).astype(bool)
