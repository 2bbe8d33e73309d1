import numpy as np
import pytest

from ia_manifolds.network import NetworkConfig, sample_channels, sample_initial_precoders

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cfg322():
    return NetworkConfig.symmetric(3, 2, 2, 1, snr_db=20.0)


@pytest.fixture
def instance(cfg322):
    ch = sample_channels(cfg322, 7, 0)
    V = sample_initial_precoders(cfg322, 7, 0)
    return cfg322, ch, V


@pytest.fixture
def acceptance_report():
    def record(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
