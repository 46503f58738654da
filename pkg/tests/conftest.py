"""Shared fixtures plus the acceptance-criteria summary table."""

import re

import numpy as np
import pytest

CRITERIA_TITLES = {
    1: "parameter-count reproduction",
    2: "fourier correctness vs naive oracle",
    3: "autodiff finite-difference checks",
    4: "corruption closed-form oracles",
    5: "saturated-mixing reduction equivalence",
    6: "activation and loss unit values",
    7: "desk-scale architecture trend",
    8: "determinism and checkpoint roundtrip",
}

_seen = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call":
        _seen[num] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _seen[num] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _seen:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(CRITERIA_TITLES):
        outcome = _seen.get(num, "not run")
        word = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        tr.write_line(f"criterion {num} ({CRITERIA_TITLES[num]}): {word}")
