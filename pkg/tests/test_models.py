import numpy as np
import pytest
from scipy.integrate import quad as quadrature

from conftest import LN20
from iphs_opt.core import drift, entropy_production, distance_to_equilibria, rhs
from iphs_opt.errors import ConfigurationError, InvalidStateError
from iphs_opt.models import (
    HeatExchangerParams,
    compartment_energy,
    entropy_at_temperature,
    heat_exchanger_model,
    temperature,
    thermostat_to_entropy_control,
)
from iphs_opt.sim import ControlSignal, IntegratorOptions, integrate

P = HeatExchangerParams()


def test_temperature():
    assert temperature(P, 1, 0.0) == 1.0
    assert temperature(P, 2, LN20) == pytest.approx(20.0, rel=1e-15)
    assert temperature(HeatExchangerParams(T_ref=2.0), 1, 0.0) == 2.0
    assert entropy_at_temperature(P, 1, 20.0) == pytest.approx(LN20)
    with pytest.raises(ConfigurationError):
        temperature(P, 3, 0.0)


def test_compartment_energy_is_primitive_of_temperature():
    p = HeatExchangerParams(c1=2.5, T_ref=1.7, S_ref=0.3)
    for s in (-1.0, 0.0, 2.0):
        integral, _ = quadrature(lambda r: temperature(p, 1, r), -200.0, s, epsabs=1e-13, epsrel=1e-13)
        assert compartment_energy(p, 1, s) == pytest.approx(integral, rel=1e-10)
    assert compartment_energy(P, 1, 0.0) == 1.0


def test_total_energies(hx):
    assert hx.H.eval(np.array([LN20, LN20])) == pytest.approx(40.0, rel=1e-14)
    assert hx.H.eval(np.zeros(2)) == 2.0


def test_fourier_law_heat_flows():
    """Heat flow into each compartment is lam (T_other - T_own)."""
    p = HeatExchangerParams(lam=0.7, c1=2.0, c2=0.5)
    m = heat_exchanger_model(p)
    x = np.array([0.4, -0.3])
    T = np.array([temperature(p, 1, x[0]), temperature(p, 2, x[1])])
    heat = T * drift(m, x)
    np.testing.assert_allclose(heat, [0.7 * (T[1] - T[0]), 0.7 * (T[0] - T[1])], rtol=1e-14)
    assert entropy_production(m, x) == pytest.approx(0.7 * (T[0] - T[1]) ** 2 / (T[0] * T[1]), rel=1e-14)


def test_equilibria_with_unequal_capacities():
    p = HeatExchangerParams(c1=2.0, c2=0.5, S_ref=0.4)
    m = heat_exchanger_model(p)
    # equal temperatures -> zero distance and zero drift
    s1 = 1.3
    s2 = entropy_at_temperature(p, 2, temperature(p, 1, s1))
    x = np.array([s1, s2])
    assert distance_to_equilibria(m, x) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(drift(m, x), 0.0, atol=1e-14)
    y = np.random.default_rng(0).uniform(-2, 2, (30, 2))
    np.testing.assert_allclose(distance_to_equilibria(m, y, generic=True), distance_to_equilibria(m, y), atol=1e-8)


def test_thermostat_conversion():
    assert thermostat_to_entropy_control(1.3, 1.3) == 0.0
    assert thermostat_to_entropy_control(2.0, 1.0) == 1.0
    assert thermostat_to_entropy_control(1.0, 2.0) == -0.5
    with pytest.raises(InvalidStateError):
        thermostat_to_entropy_control(1.0, 0.0)


def test_thermostat_at_compartment_temperature_rests(hx_thermostat):
    x = np.array([0.6, 0.6])
    np.testing.assert_allclose(rhs(hx_thermostat, x, [np.exp(0.6)]), 0.0, atol=1e-15)


def test_thermostat_rhs_equals_transformed(hx, hx_thermostat):
    x = np.random.default_rng(1).uniform(-2, 2, (25, 2))
    Te = np.random.default_rng(2).uniform(0.2, 5.0, (25, 1))
    u = thermostat_to_entropy_control(Te, np.exp(x[:, :1]))
    np.testing.assert_allclose(rhs(hx_thermostat, x, Te), rhs(hx, x, u), rtol=1e-13, atol=1e-14)


def test_thermostat_trajectories_match(hx, hx_thermostat):
    opts = IntegratorOptions(rtol=1e-12, atol=1e-12)
    Te = ControlSignal.piecewise([0, 1, 2.5, 5], [[2.0], [0.5], [3.0]])
    fb = ControlSignal.from_callable(lambda t, x: thermostat_to_entropy_control(Te(t), np.exp(x[0])), knots=(1, 2.5))
    a = integrate(hx_thermostat, [0.0, 0.5], Te, 5.0, opts)
    b = integrate(hx, [0.0, 0.5], fb, 5.0, opts)
    np.testing.assert_allclose(a.x[-1], b.x[-1], atol=1e-10)


def test_variant_parsing():
    assert heat_exchanger_model(variant="thermostat").name.endswith("thermostat")
    with pytest.raises(ValueError):
        heat_exchanger_model(variant="bogus")
    with pytest.raises(ConfigurationError):
        HeatExchangerParams(lam=-1.0)


def test_quadratic_ratio(quad):
    x = np.random.default_rng(3).uniform(-5, 5, (100, 2))
    d = distance_to_equilibria(quad, x)
    np.testing.assert_allclose(entropy_production(quad, x) / d ** 2, 2.0, rtol=1e-12)
