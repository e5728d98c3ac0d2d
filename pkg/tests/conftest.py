import pytest

from nhsta.model import SystemParams

# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def drive():
    """Drive frequencies shared by all presets."""
    return dict(omega_c=85.0, omega_m=35.0, epsilon_m=50.0, omega_d=1.0)


@pytest.fixture
def cd_a(drive):
    return SystemParams(g_m=1.0, kappa_c=1.0, kappa_m=0.3, **drive)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
