import numpy as np
import pytest

from qgcn_ris.channel import sample_channels
from qgcn_ris.config import SystemConfig
from qgcn_ris.scenario import calibrated_config, generate_scenario

# acceptance criteria append "PASS/FAIL ..." lines here; printed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_config():
    return SystemConfig.build(n_elements=4, n_aps=2, n_ues=3, snr_db=10.0)


@pytest.fixture
def small_problem(small_config):
    """(scenario, channels, calibrated config) for seed 0."""
    sc = generate_scenario(0, small_config)
    ch = sample_channels(sc, small_config)
    return sc, ch, calibrated_config(ch, small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
