import re

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record ``(ok, detail)`` for an acceptance criterion; summarized at the end."""

    def record(key, ok, detail=""):
        _CRITERIA.setdefault(key, []).append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        results = _CRITERIA[key]
        ok = all(r for r, _ in results)
        detail = "; ".join(d for _, d in results if d)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
