from __future__ import annotations

import pytest

# criterion number -> (outcome, detail); filled by the acceptance tests
_RESULTS: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def detail(request):
    """Attach a one-line measurement summary to the current criterion."""
    marker = request.node.get_closest_marker("criterion")

    def record(text: str):
        if marker is not None:
            _RESULTS.setdefault(marker.args[0], [None, ""])[1] = text

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _RESULTS.setdefault(marker.args[0], [None, ""])
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        entry[0] = rep.passed
    if rep.when == "setup" and rep.skipped:
        entry[0] = None


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        ok, text = _RESULTS[num]
        status = "PASS" if ok else ("SKIP" if ok is None else "FAIL")
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {text}")
