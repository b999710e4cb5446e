import os

import pytest

from hgtlab.ess import compute_constants
from hgtlab.kernels import make_kernel


def pytest_collection_modifyitems(config, items):
    if os.environ.get("HGTLAB_EXTENDED"):
        return
    skip = pytest.mark.skip(reason="extended run; set HGTLAB_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def tanh():
    return make_kernel("tanh")


@pytest.fixture(scope="session")
def arctan():
    return make_kernel("arctan")


@pytest.fixture(scope="session")
def kc(tanh):
    return compute_constants(tanh)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
