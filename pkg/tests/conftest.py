import pytest

_criteria: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.user_properties and dict(report.user_properties).get("criterion")
    if marker:
        _criteria.append((marker, "PASS" if report.passed else "FAIL"))


@pytest.fixture
def criterion(request, record_property):
    """Tag an acceptance test with the criterion it gates."""
    name = request.node.get_closest_marker("criterion").args[0]
    record_property("criterion", name)
    return name


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion gated by this test")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _criteria:
        terminalreporter.write_line(f"{status}  {name}")
