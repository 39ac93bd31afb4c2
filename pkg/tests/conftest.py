import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("birklab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("birklab")


@pytest.fixture
def swap():
    return np.array([[0, 1], [1, 0]], dtype=np.int64)


@pytest.fixture
def example1_pair(swap):
    from birklab.reductions import InstancePair
    return InstancePair(swap, np.eye(2, dtype=np.int64))
