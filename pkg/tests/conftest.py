import numpy as np
import pytest
from hypothesis import settings

from twoweight import harness

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def instances():
    """A small fixed corpus shared by the module tests: seeds 1..12 over every profile."""
    return [harness.generate(s, harness.profile_for(s), atoms=16) for s in range(1, 13)]


@pytest.fixture(scope="session")
def analyses(instances):
    return [harness.analyse(i) for i in instances]


def rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
