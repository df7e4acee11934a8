import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimir_contrast import (DielectricModel, NoPlasmaFrequency, StaticDivergence, TableRange, Units,
                              cm_contrast, delta_epsilon, epsilon_at, figure2_model, plasma_wavelength)
from casimir_contrast.errors import DomainError
from casimir_contrast.materials import write_table_csv


def test_figure2_static_value():
    assert epsilon_at(figure2_model(), 0.0) == pytest.approx(1.5, rel=1e-15)


def test_figure2_at_plasma_frequency():
    assert epsilon_at(figure2_model(), 1.0) == pytest.approx(4 / 3, rel=1e-15)


@pytest.mark.parametrize("model", [figure2_model(), DielectricModel.drude_lorentz(2.0, 0.0, 0.3),
                                   DielectricModel.tabulated([0, 1, 2], [3.0, 2.0, 1.5])])
def test_high_frequency_transparency(model):
    assert epsilon_at(model, 1e8) - 1 < 1e-12


def test_vacuum_is_one():
    assert np.all(epsilon_at(DielectricModel.vacuum(), np.array([0.0, 1.0, 1e5])) == 1.0)


def test_undamped_drude_diverges_at_zero():
    with pytest.raises(StaticDivergence):
        epsilon_at(DielectricModel.drude_lorentz(1.0), 0.0)
    assert epsilon_at(DielectricModel.drude_lorentz(1.0), 1.0) == 2.0


def test_negative_frequency_rejected():
    with pytest.raises(DomainError):
        epsilon_at(figure2_model(), -1.0)


@pytest.mark.parametrize("omega_p, expected", [(1.0, 2 * math.pi), (2.0, math.pi)])
def test_plasma_wavelength(omega_p, expected):
    assert plasma_wavelength(DielectricModel.drude_lorentz(omega_p, 1.0)) == pytest.approx(expected)


@pytest.mark.parametrize("model", [DielectricModel.drude_lorentz(0.0, 1.0), DielectricModel.vacuum(),
                                   DielectricModel.tabulated([0, 1], [2.0, 1.5])])
def test_no_plasma_frequency(model):
    with pytest.raises(NoPlasmaFrequency):
        plasma_wavelength(model)


def test_cm_contrast_values():
    assert cm_contrast(1.0) == 0.0
    assert cm_contrast(math.inf) == 3.0
    assert cm_contrast(1.5) == pytest.approx(3 / 7, rel=1e-15)
    assert cm_contrast(epsilon_at(DielectricModel.perfect_conductor(), 1.0)) == 3.0


@given(st.floats(1.0 + 1e-9, 1e12))
def test_cm_contrast_below_bare_contrast(eps):
    assert cm_contrast(eps) < eps - 1


@settings(max_examples=60)
@given(st.floats(0.01, 10), st.one_of(st.just(0.0), st.floats(1e-3, 10)), st.floats(0, 5), st.floats(0, 50),
       st.floats(1e-6, 50))
def test_drude_lorentz_monotone(wp, w0, gamma, z1, dz):
    m = DielectricModel.drude_lorentz(wp, w0, gamma)
    # eps diverges at zeta = 0 whenever omega_0 = 0
    if w0 == 0 and z1 == 0:
        z1 = 1e-3
    assert epsilon_at(m, z1) >= epsilon_at(m, z1 + dz)


def test_table_interpolation_and_tail_are_continuous():
    zeta = [0.0, 0.5, 1.0, 2.0, 4.0]
    eps = [1.5, 1.45, 1.33, 1.14, 1.04]
    m = DielectricModel.tabulated(zeta, eps)
    assert np.allclose(epsilon_at(m, np.array(zeta)), eps, rtol=1e-14)
    below, above = epsilon_at(m, 4.0 * (1 - 1e-9)), epsilon_at(m, 4.0 * (1 + 1e-9))
    assert abs(below - above) < 1e-8
    assert epsilon_at(m, 8.0) == pytest.approx(1 + 0.04 / 4, rel=1e-12)
    grid = np.linspace(0, 10, 2001)
    assert np.all(np.diff(epsilon_at(m, grid)) <= 1e-15)


def test_table_below_range():
    m = DielectricModel.tabulated([0.5, 1.0], [2.0, 1.5])
    with pytest.raises(TableRange):
        epsilon_at(m, 0.1)


@pytest.mark.parametrize("zeta, eps", [([0, 1], [1.5, 1.6]), ([0, 0], [2, 1.5]), ([0, 1], [0.9, 0.8])])
def test_bad_tables(zeta, eps):
    with pytest.raises(DomainError):
        DielectricModel.tabulated(zeta, eps)


def test_table_csv_roundtrip(tmp_path):
    p = tmp_path / "eps.csv"
    write_table_csv(p, [0.0, 0.3, 1.7], [2.5, 2.0, 1.25])
    m = DielectricModel.from_csv(p)
    assert m.table == ((0.0, 2.5), (0.3, 2.0), (1.7, 1.25))
    assert m.describe()["tail_rule"]


def test_units():
    u = Units(1.0e15)
    assert u.length_unit == pytest.approx(2.99792458e-7)
    assert u.energy_per_area_unit > 0
    with pytest.raises(DomainError):
        Units(0.0)


def test_delta_epsilon_for_constant():
    assert delta_epsilon(DielectricModel.constant(3.0), 7.0) == 2.0
