"""Shared fixtures plus the acceptance-suite summary lines."""

from __future__ import annotations

from pathlib import Path

import pytest

from attrqa.chains import AttributionChain, PromptMode, parse_chain
from attrqa.corpus import QAInstance

from helpers import COQ_TEXT, crush_tour_instance

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def crush_instance() -> QAInstance:
    return crush_tour_instance()


@pytest.fixture
def coq_chain() -> AttributionChain:
    return parse_chain(COQ_TEXT, PromptMode.COQ)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


# --- acceptance summary: one pass/fail line per criterion -------------------

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'PASSED' else outcome}: {name}")
