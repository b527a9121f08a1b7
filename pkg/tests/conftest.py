import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CORPUS = Path(__file__).resolve().parents[1] / "src" / "txmm" / "corpus"


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


def pytest_configure(config):
    config.txmm_outcomes = {}


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so it can read the unit outcomes of this session
    items.sort(key=lambda it: Path(str(it.fspath)).name == "test_acceptance.py")


def pytest_runtest_logreport(report):
    store = _STORE.get("outcomes")
    if store is None:
        return
    if report.when == "call" or report.outcome == "failed":
        if store.get(report.nodeid) != "failed":
            store[report.nodeid] = report.outcome


_STORE: dict = {}


def pytest_sessionstart(session):
    _STORE["outcomes"] = session.config.txmm_outcomes


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance")
        for ln in lines:
            terminalreporter.write_line(ln)
