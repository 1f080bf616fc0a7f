import math

import numpy as np
import pytest

from ppwg.waveguide import WaveguideConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cfg():
    return WaveguideConfig(k=2.5, Z=math.pi, R=1.0, a=0.5, N_max=8, M_max=8)


@pytest.fixture
def cfg_k2():
    # m = 2 sits exactly on cutoff at k = 2, Z = pi
    return WaveguideConfig(k=2.0, Z=math.pi, R=1.0, N_max=8, M_max=8, exclude_cutoff=True)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
