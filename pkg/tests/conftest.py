import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def rel(a, b):
    """Relative Frobenius distance of ``a`` from reference ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (nb if nb > 0 else 1.0)
