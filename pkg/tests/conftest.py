import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

from barystab.measures import Domain, make_discrete  # noqa: E402


@pytest.fixture
def plane():
    return Domain(2.0, 2)


@pytest.fixture
def line():
    return Domain(1.0, 1)


def random_measure(rng, n, domain, scale=0.9, uniform=False):
    pts = rng.uniform(-scale, scale, size=(n, domain.d)) * domain.R / np.sqrt(domain.d)
    w = np.ones(n) if uniform else rng.uniform(0.1, 1.0, n)
    return make_discrete(pts, w, domain)
