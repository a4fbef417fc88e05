import numpy as np
import pytest

from regselect import LinearModel


def random_model(rng, n, k, sigma2=None):
    return LinearModel(rng.standard_normal((n, k)), sigma2=sigma2)


def span_model(columns, n, sigma2=None, mix_seed=None):
    """Model whose estimation space is the span of the given unit vectors.

    ``columns`` are indices into the standard basis of R^n; an optional
    random nonsingular mixing keeps the design from being trivially
    orthonormal while preserving the span exactly.
    """
    k = len(columns)
    x = np.zeros((n, k))
    for j, c in enumerate(columns):
        x[c, j] = 1.0
    if mix_seed is not None:
        rng = np.random.default_rng(mix_seed)
        while True:
            mix = rng.standard_normal((k, k))
            if abs(np.linalg.det(mix)) > 1e-3:
                break
        x = x @ mix
    return LinearModel(x, sigma2=sigma2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
