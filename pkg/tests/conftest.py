import numpy as np
import pytest

from hypstab.models import DensityFlowParams, SaintVenantParams

_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "acceptance":
            _ACCEPTANCE_LINES.append(value)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def df_params():
    return DensityFlowParams(1.0, 2.0, H_star=2.0, Q_star=3.0)


@pytest.fixture
def sv_params():
    return SaintVenantParams(2.0, 3.0)


def random_well_conditioned(rng, n, max_cond=1e3):
    while True:
        A = rng.normal(size=(n, n))
        if np.linalg.cond(A) < max_cond:
            return A
