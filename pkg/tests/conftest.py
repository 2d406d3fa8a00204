import os
import warnings

import pytest

os.environ.setdefault("MPLBACKEND", "Agg")

_ACCEPTANCE = []


@pytest.fixture
def record_check():
    """Store a verify.Check so the terminal summary can list every criterion."""

    def _record(check):
        _ACCEPTANCE.append(check)
        print(check.line())
        return check

    return _record


@pytest.fixture(autouse=True)
def _quiet_regime_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="eps/sqrt")
        yield


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_ACCEPTANCE, key=lambda c: (c.number, c.title)):
        terminalreporter.write_line(c.line())
