import zlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hagedorn_kit.sampling import make_rng

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng(request):
    """Seeded generator, distinct per test."""
    return make_rng(20240917, request.node.nodeid)


def seeded(name: str) -> np.random.Generator:
    return make_rng(zlib.crc32(name.encode()), name)
