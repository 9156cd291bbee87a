import numpy as np
import pytest

from qcsim.config import parse_config
from qcsim.runner import run_trials
from qcsim.table import applicable_cells, cell_kind


def cell_config(protocol: str, kind: str, seed: int = 20240601, **extra) -> dict:
    d = {"protocol": protocol, "seed": seed, "attack": {"kind": kind}}
    if protocol == "bqc" and kind == "pns":
        # Enough multi-photon pulses for the leak to dominate the guess.
        d["params"] = {"bqc_mu": 6.0}
    d.update(extra)
    return d


@pytest.fixture(scope="session")
def cell_results():
    """Every applicable matrix cell at full strength, run once per session."""
    out = {}
    for protocol, column, prop in applicable_cells():
        kind = cell_kind(protocol, column)
        out[(protocol, column)] = (prop, run_trials(parse_config(cell_config(protocol, kind))))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
