import pytest

from hesw.spectral import Grid


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def grid128():
    return Grid(128)


@pytest.fixture
def grid256():
    return Grid(256)
