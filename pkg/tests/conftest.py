import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "parsum", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "parsum"))

# Acceptance verdicts collected by tests/test_acceptance.py and echoed at the end of the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)


def pytest_collection_modifyitems(config, items):
    # run the expensive acceptance module last so unit failures surface first
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))


@pytest.fixture(scope="session")
def exp1():
    from parsum import Exponential
    return Exponential(1.0)


@pytest.fixture(scope="session")
def weibull21():
    from parsum import Weibull
    return Weibull(2.0, 1.0)


@pytest.fixture(scope="session")
def table3_matrix():
    from parsum import experiments
    return experiments.table3_matrix(experiments.table3())
