import itertools

import numpy as np
import pytest


def all_words(N):
    return np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance reporting ------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when == "teardown":
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if report.failed or report.when == "call":
        if report.failed and not detail and call.excinfo is not None:
            detail = call.excinfo.exconly().splitlines()[0][:160]
        _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}: {detail}")
