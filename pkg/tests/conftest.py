import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def record_criterion(request):
    """Record one acceptance line, then fail the test if the criterion failed."""
    results = request.config.stash[_RESULTS]

    def record(number, ok, detail):
        results.append((number, ok, detail))
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = sorted(config.stash.get(_RESULTS, []))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in results:
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
