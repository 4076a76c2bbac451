import pytest

from polyak_pg.envs import TwoStep


@pytest.fixture
def two_step():
    return TwoStep()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
