import numpy as np
import pytest

from rhig.core import FeasibleSet, quadratic_tracking_cost
from rhig.predict import StochasticPredictionModel, generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, T=None, n=None, box=True, gamma=0.7, sigma2=0.5):
    """Quadratic cost, box (or free) set, AR(1)-correlated prediction table."""
    T = int(rng.integers(1, 11)) if T is None else T
    n = int(rng.integers(1, 3)) if n is None else n
    spec = quadratic_tracking_cost(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0))
    fset = FeasibleSet.box(-1.5, 1.5, dim=n) if box else FeasibleSet.whole_space(n)
    model = StochasticPredictionModel.ar1(gamma, sigma2, T, n, int(rng.integers(1 << 31)))
    table = generate(model, rng.normal(size=(T, n)))
    x0 = rng.uniform(-1, 1, n)
    return spec, fset, table, x0
