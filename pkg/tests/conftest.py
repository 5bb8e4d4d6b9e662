import numpy as np
import pytest

from scdual import PanelDataset


def make_panel(n=12, t0=4, k_post=2, seed=0, n1=None):
    rng = np.random.default_rng(seed)
    T = t0 + k_post + 1
    Y = rng.standard_normal((n, T))
    D = np.zeros(n, bool)
    D[: (n // 3 if n1 is None else n1)] = True
    return PanelDataset(Y, D, t0)


@pytest.fixture
def small_panel():
    return make_panel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
