import numpy as np
import pytest

from triwave.flux import FluxTable, derivative_bounds, make_flux

EPS = 0.05


@pytest.fixture(scope="session")
def spec():
    return make_flux("quadratic_coupled")


@pytest.fixture(scope="session")
def bounds(spec):
    return derivative_bounds(spec)


@pytest.fixture(scope="session")
def flux_table(spec):
    return FluxTable(spec, EPS)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
