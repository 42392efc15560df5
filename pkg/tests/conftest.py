"""Shared pytest plumbing.

The acceptance tests record one line per criterion through
``record_criterion``; the terminal-summary hook prints them after the run so
the pass/fail ledger is visible even with output capturing on.
"""

_CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _CRITERION_LINES:
        terminalreporter.write_line(line)
