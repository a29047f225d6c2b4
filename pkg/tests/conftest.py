from __future__ import annotations

import pytest

from sketchref.fixtures import build_mini_fixture

CRITERIA = ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "S1", "S2")

_outcomes: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): ties a test to an acceptance criterion"
    )


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_names = [
        m.args[0]
        for m in getattr(report, "_criterion_markers", [])
    ]
    for name in marker_names:
        _outcomes.setdefault(name, []).append(report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report._criterion_markers = list(item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    seen = [c for c in CRITERIA if c in _outcomes]
    if not seen:
        return
    terminalreporter.section("acceptance criteria")
    for name in seen:
        status = "PASS" if all(_outcomes[name]) else "FAIL"
        terminalreporter.write_line(f"{name}: {status}")


@pytest.fixture(scope="session")
def mini_fixture(tmp_path_factory):
    root = tmp_path_factory.mktemp("mini")
    return build_mini_fixture(root)
