"""
pytest hooks: the --which switch between unit and end-to-end tests, and the
output folder of the end-to-end runs
"""

import pytest

def pytest_addoption(parser):
    """
    Args:
        parser: pytest argument parser
    """
    parser.addoption("--e2eoutput_path", action="store", default="./",
                     help="folder where end-to-end tests write simulations, checkpoints and tables")
    parser.addoption("--which", action="store", default="unit", choices=("unit", "e2e", "all"),
                     help="which tests to run: unit, e2e, all")

@pytest.fixture
def e2eoutput_path(request):
    """
    Value of --e2eoutput_path

    Args:
        request (FixtureRequest): pytest request of a fixture

    Returns:
        str: output folder
    """
    return request.config.getoption("--e2eoutput_path")


def pytest_configure(config):
    config.addinivalue_line("markers", "e2e: long simulation-backed acceptance test")


def pytest_collection_modifyitems(config, items):
    """
    Skips e2e tests under --which unit (the default) and unit tests under --which e2e

    Args:
        config: pytest configuration object
        items: collected tests
    """
    which = config.getoption("--which")
    if which == "all":
        return
    run_e2e = which == "e2e"
    skip = pytest.mark.skip(reason="Not marked as e2e" if run_e2e else "Marked as e2e")
    for item in items:
        if ("e2e" in item.keywords) != run_e2e:
            item.add_marker(skip)
