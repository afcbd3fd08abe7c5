import pytest

from carnot.algebra import build_free_nilpotent
from carnot.catalog import engel, heisenberg


@pytest.fixture(scope="session")
def heis():
    return heisenberg()


@pytest.fixture(scope="session")
def engel_spec():
    return engel()


@pytest.fixture(scope="session")
def free23():
    return build_free_nilpotent(2, 3)


@pytest.fixture(scope="session")
def free24():
    return build_free_nilpotent(2, 4)


@pytest.fixture(scope="session")
def abelian2():
    return build_free_nilpotent(2, 1)
