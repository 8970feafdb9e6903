from pathlib import Path

import numpy as np
import pytest

from n1screen.contingency import ScreeningOptions, prepare_base, screen_all
from n1screen.graph import build_graph
from n1screen.ingest import load_network

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def model14():
    return load_network(DATA / "ieee14.cdf")


@pytest.fixture(scope="session")
def model118():
    return load_network(DATA / "ieee118.cdf")


@pytest.fixture(scope="session")
def graph14(model14):
    return build_graph(model14)


@pytest.fixture(scope="session")
def graph118(model118):
    return build_graph(model118)


@pytest.fixture(scope="session")
def ctx14(model14):
    return prepare_base(model14, ScreeningOptions())


@pytest.fixture(scope="session")
def ctx118(model118):
    return prepare_base(model118, ScreeningOptions())


@pytest.fixture(scope="session")
def sweep118(ctx118):
    return screen_all(ctx118)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("AC")[1].split()[0])):
            terminalreporter.write_line(line)
