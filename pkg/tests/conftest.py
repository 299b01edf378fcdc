"""Session bookkeeping for the acceptance report."""
import time

import pytest

SESSION = {"start": time.perf_counter(), "outcomes": {}, "report": []}


def pytest_collection_modifyitems(items):
    # the acceptance module summarises the rest of the session, so it runs last
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__ == "test_acceptance":
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        state = "xfailed" if hasattr(rep, "wasxfail") and rep.skipped else rep.outcome
        SESSION["outcomes"][item.nodeid] = state


def pytest_terminal_summary(terminalreporter):
    if SESSION["report"]:
        terminalreporter.section("acceptance criteria")
        for line in SESSION["report"]:
            terminalreporter.write_line(line)
