import time

import pytest

# criterion number -> (title, passed, seconds, budget)
_ACCEPTANCE: dict[int, tuple[str, bool, float, float]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, title, budget): acceptance criterion with a runtime budget"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    marker = item.get_closest_marker("acceptance")
    start = time.perf_counter()
    outcome = yield
    if marker is None:
        return
    number, title, budget = marker.args
    elapsed = time.perf_counter() - start
    passed = outcome.excinfo is None and elapsed <= budget
    _ACCEPTANCE[number] = (title, passed, elapsed, budget)
    if outcome.excinfo is None and elapsed > budget:
        outcome.force_exception(AssertionError(
            f"criterion {number} took {elapsed:.1f} s, budget {budget:.0f} s"
        ))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, elapsed, budget = _ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  "
            f"({elapsed:.2f} s of {budget:.0f} s)"
        )
