import pytest

from yangsaf.acceptance import FM_EXTENSION
from yangsaf.config import AnalysisConfig
from yangsaf.evaluation import DEFAULT_MOD_FREQS, DEFAULT_SNRS, fm_battery, snr_sweep

# PASS/FAIL lines from the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def config():
    return AnalysisConfig()


@pytest.fixture(scope="session")
def fm_points(config):
    """The FM battery (120 Hz, 100 cents p-p, SNR 100 dB), both chains."""
    return fm_battery(DEFAULT_MOD_FREQS, config)


@pytest.fixture(scope="session")
def fm_extension(config):
    return fm_battery(FM_EXTENSION, config)


@pytest.fixture(scope="session")
def noise_rows(config):
    """Constant-F0 battery over SNR, five seeds, H-chain."""
    return snr_sweep("H", DEFAULT_SNRS, range(5), config)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
