import numpy as np
import pytest

_RESULTS = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def record():
    """Log one acceptance line; the list is printed at the end of the run."""
    def _record(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        _RESULTS.append(line)
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
