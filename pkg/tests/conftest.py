import numpy as np
import pytest

from typsgd.data import Dataset
from typsgd.models import quadratic_constants


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_quadratic():
    """Well-conditioned 8-sample least-squares problem with exact constants."""
    gen = np.random.default_rng(7)
    x = gen.normal(0.0, 1.0, (8, 2)) + 0.3
    w = np.array([1.5, -0.5])
    y = x @ w + 0.2 * gen.normal(0.0, 1.0, 8)
    dataset = Dataset(features=x, targets=y[:, None])
    return dataset, quadratic_constants(dataset)
