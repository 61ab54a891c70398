"""Shared pytest plumbing.

The acceptance tests register one verdict line each; echoing them from the
terminal-summary hook keeps them visible under output capture, which
otherwise discards anything a passing test prints.
"""

_verdicts = []


def record_verdict(line: str) -> None:
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts:
            terminalreporter.write_line(line)
