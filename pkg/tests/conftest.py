import os
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CRITERIA = {
    1: "gradient suite",
    2: "geometry oracles",
    3: "offset-map identities",
    4: "regrouping correctness",
    5: "evaluator equivalence",
    6: "end-to-end mis-grouping experiment",
    7: "toy training",
    8: "format round-trips and CLI",
}

_outcomes = defaultdict(list)


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is not None and (report.when == "call" or report.outcome != "passed"):
        _outcomes[crit].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result()._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit, name in CRITERIA.items():
        results = _outcomes.get(crit)
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {crit} ({name}): {status} [{len(results or [])} checks]")
