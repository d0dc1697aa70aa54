import pytest

from gassolid import SpatialGrid


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid(201)


@pytest.fixture(scope="session")
def fine_grid():
    return SpatialGrid(401)
