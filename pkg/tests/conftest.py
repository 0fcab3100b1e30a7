import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riemstein.geometry import Circle, Euclidean, Hyperbolic, Rotations, Sphere

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

KINDS = [Euclidean(3), Sphere(2), Sphere(4), Hyperbolic(2), Hyperbolic(3), Rotations(), Circle()]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def kind_id(M):
    return f"{M.name}{M.dim}"
