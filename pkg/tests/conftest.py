"""Shared fixtures and the acceptance summary printed after the run."""

from collections import OrderedDict

import pytest

from airhaptics.bundled import a320_profile
from airhaptics.config import load_rig, parse_hand_trajectory, resolve_input
from airhaptics.hand import canonical_pose

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "failed": []})
    if not rep.passed:
        entry["ok"] = False
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] else "FAIL"
        extra = f"  [failed: {', '.join(e['failed'])}]" if e["failed"] else ""
        terminalreporter.write_line(f"{status}  criterion {n:2d}: {e['title']}{extra}")


@pytest.fixture(scope="session")
def a320():
    return a320_profile()


@pytest.fixture(scope="session")
def rig():
    return load_rig("default")


@pytest.fixture(scope="session")
def demo_poses():
    with open(resolve_input("default", "trajectory"), newline="") as fh:
        return parse_hand_trajectory(fh)


@pytest.fixture
def hand():
    return canonical_pose()
