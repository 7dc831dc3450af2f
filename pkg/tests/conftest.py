import numpy as np
import pytest

from mball import polyspace as ps
from mball import weights as wts


@pytest.fixture(scope="session")
def lebesgue2():
    return wts.jacobi_weight(0.5, 2)


@pytest.fixture(scope="session")
def basis_of():
    """Cached basis factory shared across the whole test session."""

    def factory(n, w):
        return ps.get_basis(n, w)

    return factory


def random_coeffs(size, seed):
    return np.random.default_rng(seed).standard_normal(size)
