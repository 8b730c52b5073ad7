import numpy as np
import pytest

from msdis.geometry import RadarLayout, SearchGrid
from msdis.model import RadarModel
from msdis.waveform import WaveformConfig, generate_codes

LAYOUT = RadarLayout([(0.0, 0.0), (6500.0, 500.0)], [(1500.0, 1200.0), (8500.0, 5200.0)])
Q1 = np.array([4000.0, 3650.0])
Q2 = np.array([4000.0, 3850.0])


@pytest.fixture(scope="session")
def layout():
    return LAYOUT


@pytest.fixture(scope="session")
def wcfg():
    return WaveformConfig(T=3.2e-6, L=32, W=10e6, T_s=0.05e-6)


@pytest.fixture(scope="session")
def bank(wcfg):
    return generate_codes(2, wcfg.L, 7)


@pytest.fixture(scope="session")
def small_model(bank, wcfg):
    """5 x 5 grid around Q1 with short window, fast to evaluate."""
    grid = SearchGrid.rectangular((3980, 4020), (3630, 3670), 10.0)
    return RadarModel.build(LAYOUT, bank, wcfg, grid, fine_spacing=0.05)


@pytest.fixture(scope="session")
def desk_model(bank, wcfg):
    grid = SearchGrid.rectangular((3930, 4070), (3630, 3870), 10.0)
    return RadarModel.build(LAYOUT, bank, wcfg, grid, fine_spacing=0.05)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
