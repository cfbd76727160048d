import json
from importlib import resources
from pathlib import Path

import pytest

from overlapix.io import ingest
from overlapix.oracle import SyntheticSynthesis

DATA = Path(str(resources.files("overlapix") / "data"))

# Lines collected by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def data_path(name: str) -> Path:
    return DATA / name


def load_synthesis(name: str) -> SyntheticSynthesis:
    return SyntheticSynthesis.from_dict(json.loads(data_path(name).read_text()))


@pytest.fixture
def toy4():
    envelopes, characteristics = ingest(data_path("toy4.json"))
    return envelopes, characteristics


@pytest.fixture
def seven():
    return ingest(data_path("seven_study.json"))


@pytest.fixture
def table1():
    return load_synthesis("table1.json")


@pytest.fixture
def table3():
    return load_synthesis("table3.json")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_addoption(parser):
    parser.addoption(
        "--update-golden", action="store_true", help="rewrite the SVG/CSV snapshots in tests/golden"
    )
