import sys

import numpy as np
import pytest

from netcast.model import load_dataset, load_reference_model


@pytest.fixture(scope="session")
def reference_model():
    return load_reference_model()


@pytest.fixture(scope="session")
def mnist_1000():
    return load_dataset(limit=1000)


@pytest.fixture(scope="session")
def mnist_200(mnist_1000):
    return mnist_1000.head(200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
