import numpy as np
import pytest

from fracext import Generator, random_generator


def relerr(value, reference):
    ref = np.linalg.norm(np.atleast_1d(reference))
    return float(np.linalg.norm(np.atleast_1d(value) - np.atleast_1d(reference)) / max(ref, 1e-300))


@pytest.fixture
def diag_gen():
    return Generator(np.diag([-1.0, -4.0]))


@pytest.fixture
def scalar_gen():
    return Generator(np.diag([-1.0]))


@pytest.fixture
def rand8():
    return random_generator(8, 3)


@pytest.fixture
def rand8_u():
    return np.random.default_rng(42).standard_normal(8) + 0j
