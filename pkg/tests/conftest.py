from contextlib import contextmanager

import pytest


def pytest_configure(config):
    config._acceptance_results = []


@pytest.fixture
def criterion(request):
    """Context manager that records one acceptance criterion as PASS/FAIL."""
    results = request.config._acceptance_results

    @contextmanager
    def check(label, detail=""):
        try:
            yield
        except AssertionError as exc:
            line = f"FAIL  {label}  {detail}  ({str(exc).splitlines()[0] if str(exc) else ''})"
            results.append(line)
            print(line)
            raise
        line = f"PASS  {label}  {detail}"
        results.append(line)
        print(line)

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
