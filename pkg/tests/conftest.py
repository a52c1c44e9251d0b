import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fueterlab", max_examples=40, deadline=None)
settings.load_profile("fueterlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_glplus(rng, scale=0.3):
    """A random matrix with positive determinant, not too close to singular."""
    while True:
        U = np.eye(3) + scale * rng.standard_normal((3, 3))
        if np.linalg.det(U) > 0.2:
            return U
