import math

import numpy as np
import pytest

from galorbit.model import ModelParams

SQRT2 = math.sqrt(2.0)
GOLDEN = 0.5 * (1.0 + math.sqrt(5.0))


@pytest.fixture
def generic():
    return ModelParams(1.0, 1.0, 1.0, SQRT2)


def central_jacobian(f, s, step=1e-5):
    """Central-difference jacobian of ``f`` at ``s`` (test oracle)."""
    s = np.asarray(s, dtype=float)
    cols = []
    for j in range(s.size):
        e = np.zeros_like(s)
        e[j] = step
        cols.append((np.asarray(f(s + e)) - np.asarray(f(s - e))) / (2 * step))
    return np.column_stack(cols)
