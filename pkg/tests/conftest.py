"""Collects acceptance-criterion outcomes and prints one line per criterion."""

from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)


@pytest.fixture
def record():
    """``record(criterion, check, passed, detail)`` stores one sub-check outcome."""
    def _record(criterion, check, passed, detail=""):
        _RESULTS[criterion].append((check, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        checks = _RESULTS[crit]
        ok = all(p for _, p, _ in checks)
        failed = [f"{name} ({detail})" for name, p, detail in checks if not p]
        line = f"criterion {crit}: {'PASS' if ok else 'FAIL'} [{sum(p for _, p, _ in checks)}/{len(checks)} checks]"
        if failed:
            line += " failing: " + "; ".join(failed)
        tr.write_line(line)
