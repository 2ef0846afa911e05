import numpy as np
import pytest

from robustdet import linalg


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)


def random_triple(rng, n, k):
    """Random (z, secondaries, steering) with z complex standard normal."""
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    sec = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
    v = np.exp(2j * np.pi * rng.uniform() * np.arange(n))
    return z, sec, v


def scatter_of(sec):
    return linalg.factorize(sec @ sec.conj().T)
