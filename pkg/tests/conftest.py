import pytest

_OUTCOMES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.failed or (report.when == "call" and report.skipped):
        _OUTCOMES[marker.args] = "FAIL"
    elif report.when == "call":
        _OUTCOMES.setdefault(marker.args, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_OUTCOMES.items()):
        terminalreporter.write_line(f"{outcome} criterion {number}: {title}")
