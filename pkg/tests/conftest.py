import pytest

from geoaov.assets import suite_path
from geoaov.bench import load_suite
from geoaov.toolenv import catalog_default


@pytest.fixture(scope="session")
def catalog():
    return catalog_default()


@pytest.fixture(scope="session")
def suite_tasks():
    return load_suite(suite_path())


@pytest.fixture(scope="session")
def tasks_by_id(suite_tasks):
    return {t.id: t for t in suite_tasks}
