import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, passed, detail)``."""
    lines = request.config.stash[_LINES]

    def record(n, passed, detail):
        line = f"CRITERION {n} {'PASS' if passed else 'FAIL'}: {detail}"
        lines.append((n, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda x: x[0]):
            terminalreporter.write_line(line)
