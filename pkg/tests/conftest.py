import pytest

from cvqpt import DetectorModel, make_probe


@pytest.fixture(scope="session")
def det():
    return DetectorModel(0.1)


@pytest.fixture(scope="session")
def probe():
    return make_probe(0.1, 0.05)
