import time

import pytest
from hypothesis import settings

from dramdse.costs import load_cost_table
from dramdse.dram import DramGeometry
from dramdse.engine import dse
from dramdse.report import DEFAULT_NETWORK
from dramdse.workload import BufferConfig, load_network

settings.register_profile("ci", derandomize=True, deadline=None)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def geom():
    return DramGeometry()


@pytest.fixture(scope="session")
def table():
    return load_cost_table()


@pytest.fixture(scope="session")
def alexnet():
    return load_network(DEFAULT_NETWORK)


@pytest.fixture(scope="session")
def alexnet_dse(alexnet, geom, table):
    start = time.perf_counter()
    out = dse(alexnet, geom, BufferConfig(), table=table)
    out.elapsed_s = time.perf_counter() - start
    return out


_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.append((marker.args[0], marker.args[1], report.outcome.upper(), report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration in sorted(_ACCEPTANCE):
        word = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"[{word}] criterion {number}: {title} ({duration:.1f}s)")
