import sys
from collections import OrderedDict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = OrderedDict(
    [
        ("AC-1", "link base-frequency table"),
        ("AC-2", "KEEPALIVE recovery end to end"),
        ("AC-3", "CWT period accuracy"),
        ("AC-4", "flap-damping bursts and envelope"),
        ("AC-5", "oracle equivalence"),
        ("AC-6", "invariant suite"),
        ("AC-7", "false-positive control"),
        ("AC-8", "pcap round-trip"),
    ]
)

_outcomes: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id): test belongs to an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(marker.args[0], []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for ac, title in ACCEPTANCE.items():
        results = _outcomes.get(ac)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"{ac} {status:7s} {title} ({sum(results or [])}/{len(results or [])} checks)")
