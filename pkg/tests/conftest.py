import numpy as np
import pytest

try:
    from threadpoolctl import threadpool_limits

    threadpool_limits(1)
except Exception:
    pass


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
