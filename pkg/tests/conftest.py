import pytest

from rademacher_stein import set_threads


@pytest.fixture(autouse=True)
def single_thread():
    set_threads(1)
    yield
    set_threads(1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
