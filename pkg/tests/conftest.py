import pytest

from slowform.models import build_model


@pytest.fixture(scope="session")
def stommel():
    return build_model("stommel")


@pytest.fixture(scope="session")
def fhn():
    return build_model("fhn")


@pytest.fixture(scope="session")
def maxwell_bloch():
    return build_model("maxwell_bloch")


@pytest.fixture(scope="session")
def linear():
    return build_model("linear")
