import random

import pytest


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERION_RESULTS
    except ImportError:
        return
    if not CRITERION_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, verdict, detail in CRITERION_RESULTS:
        terminalreporter.write_line(f"[{verdict}] {name} ({detail})")
