import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _criteria.get(number)
    if prev is not None:
        detail = "; ".join(d for d in (prev[2], detail) if d)
    ok = rep.passed and (prev is None or prev[1])
    _criteria[number] = (title, ok, detail, rep.duration + (prev[3] if prev else 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        title, ok, detail, secs = _criteria[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.1f} s)"
        tr.write_line(line + (f"  [{detail}]" if detail else ""))
