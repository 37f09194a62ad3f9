import numpy as np
import pytest

from framecond import frames


@pytest.fixture
def sign_pattern_frame():
    """Four sign-pattern vectors in R^3 whose coherence drops from 1/2 to 1/3
    under the diagonal scaling diag(4/3, 2/3, 4/3)."""
    mat = np.array([[1, 1, 0, 0], [1, -1, 1, 1], [0, 0, 1, -1]], dtype=float) / np.sqrt(2)
    return frames.Frame(mat)


@pytest.fixture
def mercedes_benz():
    return frames.mercedes_benz_frame()
