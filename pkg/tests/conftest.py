import math

import pytest

from casimir_contrast import LayeredScenario, PlanarScenario, figure2_model, plasma_wavelength

# separation where H equals the reduced plasma wavelength c / omega_p
H_REDUCED = 1.0


@pytest.fixture(scope="session")
def fig2():
    return figure2_model()


@pytest.fixture(scope="session")
def lam_p(fig2):
    return plasma_wavelength(fig2)


@pytest.fixture(scope="session")
def planar_fig2(fig2):
    return PlanarScenario(fig2, fig2, H_REDUCED)


@pytest.fixture(scope="session")
def layered_fig2(fig2):
    return LayeredScenario.two_half_spaces(fig2, fig2, H_REDUCED)


def rel(a, b):
    return abs(a - b) / abs(b)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs the full layered or rough engines")
