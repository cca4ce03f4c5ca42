"""Shared fixtures and the acceptance-criterion report hook.

Acceptance tests record one verdict per criterion through the ``criteria``
fixture; after the run pytest prints a single PASS/FAIL line for each
recorded criterion so the gate can be read without scrolling the log.
"""

import pytest


class CriterionLog:
    """Collects (number, description, passed, detail) verdicts."""

    def __init__(self):
        self.entries = {}

    def record(self, number: int, description: str, passed: bool,
               detail: str = "") -> None:
        self.entries[number] = (description, bool(passed), detail)


def pytest_configure(config):
    config._criterion_log = CriterionLog()


@pytest.fixture(scope="session")
def criteria(request):
    return request.config._criterion_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_criterion_log", None)
    if log is None or not log.entries:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(log.entries):
        description, passed, detail = log.entries[number]
        verdict = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d}: {verdict} - {description}"
        if detail:
            line += f" ({detail})"
        tr.write_line(line, green=passed, red=not passed)
