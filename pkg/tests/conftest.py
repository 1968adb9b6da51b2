"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_RESULTS: dict[int, dict] = {}


@pytest.fixture
def criterion(record_property):
    """Tag a test with an acceptance criterion: ``criterion(3, "title")``; then
    ``criterion.detail("...")`` adds a measured value to the summary line."""

    class _Tag:
        def __call__(self, num: int, title: str):
            record_property("criterion", num)
            record_property("title", title)
            return self

        def detail(self, text: str):
            record_property("detail", text)

    return _Tag()


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when != "call" and not report.failed:
        return
    num = props["criterion"]
    entry = _RESULTS.setdefault(num, {"title": props.get("title", ""), "ok": True, "details": []})
    entry["ok"] &= report.passed
    if "detail" in props:
        entry["details"].append(str(props["detail"]))
    if report.failed:
        entry["details"].append(f"failed: {report.nodeid.split('::')[-1]}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS):
        e = _RESULTS[num]
        mark = "PASS" if e["ok"] else "FAIL"
        extra = "; ".join(e["details"])
        tr.write_line(f"[{mark}] criterion {num:2d}: {e['title']}" + (f" ({extra})" if extra else ""))
    missing = sorted(set(range(1, 13)) - set(_RESULTS))
    if missing:
        tr.write_line(f"not run: criteria {missing}")
