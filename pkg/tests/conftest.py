import numpy as np
import pytest

from cec import EngineConfig, Full, run


@pytest.fixture(scope="session", autouse=True)
def warm_kernel():
    """Load/compile the jitted engine kernel once, outside any timed test."""
    pts = np.random.default_rng(0).normal(size=(60, 2))
    run(pts, EngineConfig(family_pool=[(Full(), 2)], restarts=1, seed=0))
