"""Collects acceptance verdicts and prints them at the end of the session."""

import pytest

_VERDICTS: dict = {}


class Recorder:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.detail = ""

    def note(self, text: str) -> None:
        self.detail = text


@pytest.fixture
def acceptance(request):
    """Yield a recorder; the verdict is PASS iff the test body passes."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    rec = Recorder(number, title)
    yield rec
    failed = getattr(request.node, "_call_failed", True)
    _VERDICTS[number] = (title, "FAIL" if failed else "PASS", rec.detail)
    print("\nACCEPTANCE %d %s: %s %s" % (number, _VERDICTS[number][1], title, rec.detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item._call_failed = not rep.passed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, verdict, detail = _VERDICTS[number]
        terminalreporter.write_line("%s  criterion %d  %s  %s" % (verdict, number, title, detail))
