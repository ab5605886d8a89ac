import pytest
from helpers import BUNDLES

from indexkit.ingest import load_bundle


@pytest.fixture(scope="session")
def moon():
    return load_bundle(BUNDLES / "moon")[0]


@pytest.fixture(scope="session")
def ddc():
    return load_bundle(BUNDLES / "ddc")[0]


@pytest.fixture(scope="session")
def delicious():
    return load_bundle(BUNDLES / "delicious")[0]


@pytest.fixture(scope="session")
def wikipedia_bundle():
    return load_bundle(BUNDLES / "wikipedia")


@pytest.fixture(scope="session")
def wikipedia(wikipedia_bundle):
    return wikipedia_bundle[0]


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
