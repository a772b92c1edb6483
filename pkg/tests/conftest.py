import math

import pytest
from hypothesis import settings

from wvdisks import counterexample, scales
from wvdisks.weights import WeightFunction

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")

PSI_TLOGT = WeightFunction(m=1, alpha=1.0, t0=math.exp(5))


@pytest.fixture(scope="session")
def tlogt_scales():
    """Scales of psi = t log t, t0 = e^5, tabulated a little past r = 3."""
    return scales.build(PSI_TLOGT, 3.6)


@pytest.fixture(scope="session")
def product(tlogt_scales):
    return counterexample.construct(tlogt_scales, 3.0)


@pytest.fixture(scope="session")
def toy_product(product):
    """The first 20 circles only: small enough for brute force over every zero."""
    return product.truncated(20)
