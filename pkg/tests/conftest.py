import pytest

from rcsphere import casella_hwang_radius, constant_radius, default_knots, hermite_radius, standard_radius


@pytest.fixture(scope="session")
def ch3():
    return casella_hwang_radius(3, 0.05)


@pytest.fixture(scope="session")
def all_d3():
    d = standard_radius(3, 0.05)
    return hermite_radius(3, 0.05, default_knots(3, d), [d] * 7)


@pytest.fixture(scope="session")
def const3():
    return constant_radius(3, 0.05)
