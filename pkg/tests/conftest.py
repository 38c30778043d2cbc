import numpy as np
import pytest

from linpat.linsys import IntMatrix, LinearSystem

AP3_MATRIX = IntMatrix.from_rows([[1, -2, 1]])
AP4_MATRIX = IntMatrix.from_rows([[1, -2, 1, 0], [0, 1, -2, 1]])
AP3_PSI = LinearSystem(((1, 0), (1, 1), (1, 2)), 2)
# two points x0 + 2x1, x0 + 2x2 and their midpoint x0 + x1 + x2
MIDPOINTS_PSI = LinearSystem(((1, 2, 0), (1, 1, 1), (1, 0, 2)), 3)
IDENTITY_PSI = LinearSystem(((1,),), 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_ti_matrix(rng, r, t, bound=3):
    """Random full-rank translation-invariant r x t matrix with entries in [-bound, bound]."""
    from linpat import linsys
    while True:
        rows = []
        for _ in range(r):
            row = rng.integers(-bound, bound + 1, t - 1).tolist()
            last = -sum(row)
            if abs(last) > bound:
                break
            rows.append(row + [last])
        if len(rows) == r and linsys.rank(rows) == r:
            return IntMatrix.from_rows(rows, t)
