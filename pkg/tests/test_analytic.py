import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsm.analytic import (
    average_energy_ideal_sho, default_n_cap, grand_potential_ideal_sho,
    grand_potential_textbook, loop_energy_term, loop_term,
)
from qsm.state import BOSON, FERMION, DivergenceError, ThermoState


def test_monomer_frozen():
    assert grand_potential_ideal_sho(ThermoState(0.2), 1) == pytest.approx(4.99167637865, abs=1e-10)


def test_dimer_frozen():
    assert loop_term(ThermoState(0.2), 2) == pytest.approx(1.2417053922, abs=1e-9)
    assert loop_term(ThermoState(0.2, sign=FERMION), 2) == pytest.approx(-1.2417053922, abs=1e-9)


def test_monomer_energy_frozen():
    ref = 0.5 * (math.exp(-0.5) + math.exp(-1.5)) / (1 - math.exp(-1)) ** 2
    assert loop_energy_term(ThermoState(1.0), 1) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(1.0382, abs=1e-4)


def test_empty_system():
    for d in (1, 2, 3):
        ts = ThermoState(0.7, z=1e-300, d=d)
        assert grand_potential_ideal_sho(ts) == pytest.approx(0.0, abs=1e-290)
        assert grand_potential_textbook(ts) == pytest.approx(0.0, abs=1e-290)


@pytest.mark.parametrize("sign", [BOSON, FERMION])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_textbook_equals_loops(sign, d):
    ts = ThermoState(1.0, z=0.5, d=d, sign=sign)
    assert grand_potential_textbook(ts, 200 if d == 1 else None) == pytest.approx(
        grand_potential_ideal_sho(ts, 60), abs=1e-10)


def test_fermion_textbook_at_unit_fugacity():
    ts = ThermoState(1.0, z=1.0, sign=FERMION)
    assert grand_potential_textbook(ts, 200) == pytest.approx(
        grand_potential_ideal_sho(ts, 60), abs=1e-10)


def test_default_n_cap_neglected_factor():
    ts = ThermoState(0.5, z=0.9)
    n = default_n_cap(ts)
    assert ts.z * math.exp(-ts.beta * (0.5 + n)) < 1e-14


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("sign", [BOSON, FERMION])
def test_energy_is_beta_derivative(beta, sign):
    h = 1e-5
    ts = ThermoState(beta, sign=sign)

    def bomega(b):
        return -grand_potential_ideal_sho(ts.with_beta(b))

    fd = (bomega(beta + h) - bomega(beta - h)) / (2 * h)
    assert average_energy_ideal_sho(ts) == pytest.approx(fd, rel=1e-8)


def test_energy_per_particle_ground_state():
    # the grand-canonical energy vanishes as beta grows; per particle it
    # tends to the zero-point energy d/2
    for d in (1, 2, 3):
        ts = ThermoState(40.0, d=d)
        assert loop_energy_term(ts, 1) / loop_term(ts, 1) == pytest.approx(d / 2, rel=1e-12)


@given(st.floats(0.2, 5.0))
def test_boson_above_fermion(beta):
    b = average_energy_ideal_sho(ThermoState(beta, sign=BOSON))
    f = average_energy_ideal_sho(ThermoState(beta, sign=FERMION))
    assert b >= f


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 2.0])
def test_dimer_to_monomer_ratio(beta):
    ts = ThermoState(beta)
    ratio = loop_term(ts, 2) / loop_term(ts, 1)
    assert 1 / 15 <= ratio <= 0.3


def test_boson_sum_monotone():
    ts = ThermoState(0.4)
    partial = np.cumsum([loop_term(ts, l) for l in range(1, 51)])
    assert np.all(np.diff(partial) > 0)


def test_guards():
    with pytest.raises(DivergenceError):
        grand_potential_ideal_sho(ThermoState(0.2, z=1.2))
    with pytest.raises(ValueError):
        grand_potential_ideal_sho(ThermoState(1.0), 0)
    with pytest.raises(ValueError):
        average_energy_ideal_sho(ThermoState(1.0), 10_001)
