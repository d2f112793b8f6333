from importlib import resources

import pytest

from mdiqkd import IntensitySet
from mdiqkd.tableio import parse_tables


@pytest.fixture(scope="session")
def fixture_text() -> str:
    return resources.files("mdiqkd").joinpath("data/published_tables.csv").read_text()


@pytest.fixture(scope="session")
def fixture_path() -> str:
    return str(resources.files("mdiqkd").joinpath("data/published_tables.csv"))


@pytest.fixture(scope="session")
def published_tables(fixture_text):
    return parse_tables(fixture_text)


@pytest.fixture(scope="session")
def published_intensities() -> IntensitySet:
    return IntensitySet.symmetric(0.4, 0.1, 0.01)
