import numpy as np
import pytest

from slowmovers.desk import desk_dataset_1, desk_dataset_2


@pytest.fixture
def ds1():
    return desk_dataset_1()


@pytest.fixture
def ds2():
    return desk_dataset_2()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_square_panel(rng, n=40, p=2, slow_share=0.4, stayers=2):
    """X_t = (1, x_t) with a controlled mix of stayers, slow movers and movers."""
    x1 = rng.normal(size=n)
    step = rng.normal(scale=1.5, size=n)
    k = int(slow_share * n)
    step[:k] = rng.uniform(-0.3, 0.3, size=k)
    step[:stayers] = 0.0
    xs = np.column_stack([x1, x1 + step])
    x = np.stack([np.ones_like(xs), xs], axis=-1)
    y = rng.normal(size=(n, 2)) + xs * rng.normal(1.0, 0.5, size=(n, 1))
    return x, y
