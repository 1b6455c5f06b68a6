import numpy as np
import pytest

from marchenko.spectrum import validate_dataset


@pytest.fixture
def fig1():
    """d = 1, beta = 10, i.e. A = 2, k = 10i."""
    return validate_dataset([(2.0, 10j)])


@pytest.fixture
def fig2():
    return validate_dataset([(2.0, 0.49j)])


@pytest.fixture
def two_component():
    return validate_dataset([(1.0, 1j), (1.0, 2j)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dataset(rng, n, im_range=(0.5, 4.0), amp_range=(0.1, 2.0), complex_k=True):
    pairs = []
    for _ in range(n):
        mag = rng.uniform(*amp_range)
        a = mag * np.exp(1j * rng.uniform(0, 2 * np.pi))
        k = complex(rng.uniform(-2, 2) if complex_k else 0.0, rng.uniform(*im_range))
        pairs.append((a, k))
    return validate_dataset(pairs)
