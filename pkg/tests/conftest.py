import numpy as np
import pytest

from lpoc.matrices import CorrelationMatrix, PenaltyMatrix, validate_correlation


def random_correlation(rng: np.random.Generator, dim: int, extra: int = 10) -> CorrelationMatrix:
    """Strictly positive definite correlation matrix from a wide Gram matrix."""
    a = rng.standard_normal((dim, dim + extra))
    g = a @ a.T
    d = np.sqrt(np.diag(g))
    r = g / np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return validate_correlation(0.5 * (r + r.T), strict=True)


@pytest.fixture
def golden_case():
    """The 3x3 worked inflation example and its reference solution."""
    r_tilde = validate_correlation(
        np.array([[1.0, 0.8, 0.5], [0.8, 1.0, 0.1], [0.5, 0.1, 1.0]])
    )
    p = np.zeros((3, 3))
    p[0, 2] = p[2, 0] = 1.0
    penalty = PenaltyMatrix.from_values(p)
    expected = (0.8211, 0.1542, -0.1813)
    return r_tilde, penalty, 0.5, expected
