import pytest

_LINES = []


@pytest.fixture
def report(pytestconfig):
    """Record one PASS/FAIL line for an acceptance criterion and echo it live."""
    writer = pytestconfig.pluginmanager.getplugin("terminalreporter")

    def emit(label, passed, detail):
        line = f"criterion {label}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append(line)
        if writer is not None:
            writer.write_line("")
            writer.write_line(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
