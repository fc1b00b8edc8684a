import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LN2, LN20
from iphs_opt.core import (
    Box,
    CostWeights,
    Hamiltonian,
    IphsModel,
    LinearEntropy,
    StructureMatrix,
    distance_to_equilibria,
    drift,
    drift_jacobian,
    entropy_production,
    input_jacobian,
    is_equilibrium,
    outputs,
    outputs_jacobian,
    poisson_bracket,
    production_gradient,
    project_to_equilibria,
    rhs,
    stage_cost,
)
from iphs_opt.errors import ConfigurationError, DimensionError, InvalidStateError

coords = st.floats(-4.5, 4.5, allow_nan=False)


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    return np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(len(x))])


class TestExamples:
    def test_bracket_equal_temperatures(self, hx):
        assert poisson_bracket(hx, [0.0, 0.0]) == 0.0

    def test_bracket_is_temperature_difference(self, hx):
        assert poisson_bracket(hx, [0.0, LN2]) == pytest.approx(-1.0, abs=1e-15)

    def test_production(self, hx):
        assert entropy_production(hx, [0.0, LN2]) == pytest.approx(0.5, abs=1e-15)
        assert entropy_production(hx, [0.0, 0.0]) == 0.0

    def test_drift_matches_fourier_law(self, hx):
        x = np.array([0.0, LN2])
        T1, T2 = np.exp(x)
        np.testing.assert_allclose(drift(hx, x), [1.0, -0.5], atol=1e-15)
        np.testing.assert_allclose(drift(hx, x), [(T2 - T1) / T1, (T1 - T2) / T2], atol=1e-15)

    def test_rhs(self, hx):
        np.testing.assert_allclose(rhs(hx, [0.0, 0.0], [1.0]), [1.0, 0.0])
        np.testing.assert_allclose(rhs(hx, [0.0, LN2], [0.0]), [1.0, -0.5], atol=1e-15)

    def test_outputs(self, hx):
        yH, yS = outputs(hx, [0.0, 0.0])
        assert yH == pytest.approx([1.0]) and yS == pytest.approx([1.0])
        yH, yS = outputs(hx, [LN20, LN20])
        assert yH == pytest.approx([20.0]) and yS == pytest.approx([1.0])

    def test_stage_cost(self, hx):
        assert stage_cost(hx, [0.0, 0.0], [1.0], CostWeights.energy()) == pytest.approx(1.0)
        assert stage_cost(hx, [0.0, 0.0], [1.0], CostWeights.entropy()) == pytest.approx(-1.0)
        assert stage_cost(hx, [1.0, -2.0], [0.0], CostWeights.exergy()) == 0.0

    def test_is_equilibrium(self, hx):
        assert is_equilibrium(hx, [1.3, 1.3], tol=0.0)
        assert not is_equilibrium(hx, [0.0, LN2], tol=1e-9)
        assert is_equilibrium(hx, [0.0, LN2], tol=2.0)

    def test_distance(self, hx):
        assert distance_to_equilibria(hx, [0.7, 0.7]) == 0.0
        assert distance_to_equilibria(hx, [0.0, LN2]) == pytest.approx(LN2 / np.sqrt(2), rel=1e-15)
        assert distance_to_equilibria(hx, [0.0, LN2]) == pytest.approx(0.4901, abs=1e-4)


class TestDegenerateAndErrors:
    def make(self, J, l=(1.0, 1.0), g=None):
        return IphsModel(
            n=2, m=1, J=StructureMatrix(np.array(J, dtype=float)),
            H=Hamiltonian(lambda x: 0.5 * np.sum(np.asarray(x) ** 2, -1), lambda x: np.array(x, float),
                          lambda x: np.broadcast_to(np.eye(2), np.shape(x) + (2,))),
            S=LinearEntropy(np.array(l)), gamma=lambda x, Hx: np.ones(np.shape(x)[:-1]),
            g=g or (lambda x, Hx: np.zeros(np.shape(x)[:-1] + (2, 1))),
            domain=Box(-np.ones(2) * 10, np.ones(2) * 10),
        )

    def test_zero_structure_means_all_equilibria(self):
        m = self.make(np.zeros((2, 2)))
        x = np.random.default_rng(0).uniform(-5, 5, (20, 2))
        assert np.all(poisson_bracket(m, x) == 0.0)
        assert np.all(distance_to_equilibria(m, x) == 0.0)

    def test_zero_input_outputs_vanish(self):
        m = self.make([[0, -1], [1, 0]])
        yH, yS = outputs(m, [1.0, 2.0])
        assert np.all(yH == 0) and np.all(yS == 0)

    def test_non_skew_rejected(self):
        with pytest.raises(ConfigurationError):
            StructureMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(DimensionError):
            StructureMatrix(np.zeros((2, 3)))

    def test_domain_violation(self, hx):
        with pytest.raises(InvalidStateError):
            poisson_bracket(hx, [0.0, 7.0])
        with pytest.raises(InvalidStateError):
            rhs(hx, [np.nan, 0.0], [0.0])

    def test_bad_weights(self):
        with pytest.raises(ConfigurationError):
            CostWeights(0.7, 0.7)
        with pytest.raises(ConfigurationError):
            CostWeights(1.0, 0.0, T0=0.0)


class TestDerivatives:
    """Registered analytic Jacobians against central differences."""

    pts = np.random.default_rng(1).uniform(-2, 2, (10, 2))

    def test_drift_jacobian(self, hx):
        for x in self.pts:
            fd = np.array([fd_gradient(lambda z: drift(hx, z)[i], x) for i in range(2)])
            np.testing.assert_allclose(drift_jacobian(hx, x), fd, rtol=1e-7, atol=1e-8)

    def test_thermostat_jacobians(self, hx_thermostat):
        m = hx_thermostat
        for x in self.pts:
            u = np.array([3.0])
            fd = np.array([fd_gradient(lambda z: rhs(m, z, u)[i], x) for i in range(2)])
            np.testing.assert_allclose(drift_jacobian(m, x) + input_jacobian(m, x, u), fd, rtol=1e-7, atol=1e-8)
            dyH, dyS = outputs_jacobian(m, x)
            np.testing.assert_allclose(dyS[0], fd_gradient(lambda z: outputs(m, z)[1][0], x), rtol=1e-7, atol=1e-8)
            np.testing.assert_allclose(dyH[0], fd_gradient(lambda z: outputs(m, z)[0][0], x), atol=1e-8)

    def test_production_gradient(self, hx, quad):
        for m in (hx, quad):
            assert m.derivatives.production_grad is not None
            for x in self.pts:
                fd = fd_gradient(lambda z: entropy_production(m, z), x)
                np.testing.assert_allclose(production_gradient(m, x), fd, rtol=1e-7, atol=1e-8)

    def test_production_gradient_fallback(self):
        m = TestDegenerateAndErrors().make(((0.0, -1.0), (1.0, 0.0)))
        x = np.array([0.7, -0.4])
        # gamma = 1 and bracket = x1 - x2 give R = (x1 - x2)^2
        np.testing.assert_allclose(production_gradient(m, x), 2 * 1.1 * np.array([1.0, -1.0]), rtol=1e-8)

    def test_hamiltonian_gradient_and_hessian(self, hx):
        for x in self.pts:
            np.testing.assert_allclose(hx.H.grad(x), fd_gradient(hx.H.eval, x), rtol=1e-8)
            fd = np.array([fd_gradient(lambda z: hx.H.grad(z)[i], x) for i in range(2)])
            np.testing.assert_allclose(hx.H.hess(x), fd, rtol=1e-7, atol=1e-9)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(coords, coords)
    def test_production_nonnegative_and_identity(self, a, b):
        from iphs_opt.models import heat_exchanger_model
        hx = heat_exchanger_model()
        x = np.array([a, b])
        R = entropy_production(hx, x)
        assert R >= 0.0
        # closed form: R = (T1 - T2)^2 / (T1 T2)
        T1, T2 = np.exp(x)
        assert R == pytest.approx((T1 - T2) ** 2 / (T1 * T2), rel=1e-12, abs=1e-300)

    @settings(max_examples=200, deadline=None)
    @given(coords, coords)
    def test_closed_system_balances(self, a, b):
        """dH/dt = 0 and dS/dt = R along the drift."""
        from iphs_opt.models import heat_exchanger_model
        hx = heat_exchanger_model()
        x = np.array([a, b])
        f = drift(hx, x)
        scale = 1 + np.abs(f).sum() * np.exp(np.abs(x).max())
        assert abs(hx.H.grad(x) @ f) <= 1e-13 * scale
        assert hx.S.l @ f == pytest.approx(entropy_production(hx, x), rel=1e-12, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(coords, coords, st.floats(-10, 10))
    def test_power_balance_with_input(self, a, b, u):
        """H_x . rhs = y_H u and l . rhs = R + y_S u."""
        from iphs_opt.models import heat_exchanger_model
        hx = heat_exchanger_model()
        x = np.array([a, b])
        f = rhs(hx, x, [u])
        yH, yS = outputs(hx, x)
        scale = 1 + np.abs(f).sum() * np.exp(np.abs(x).max())
        assert hx.H.grad(x) @ f == pytest.approx(yH[0] * u, abs=1e-13 * scale)
        assert hx.S.l @ f == pytest.approx(entropy_production(hx, x) + yS[0] * u, abs=1e-12 * scale)


def test_generic_distance_matches_closed_form(hx):
    x = np.random.default_rng(2).uniform(-3, 3, (100, 2))
    np.testing.assert_allclose(distance_to_equilibria(hx, x, generic=True), distance_to_equilibria(hx, x), atol=1e-8)


def test_generic_distance_quadratic(quad):
    x = np.random.default_rng(3).uniform(-5, 5, (50, 2))
    np.testing.assert_allclose(distance_to_equilibria(quad, x), np.abs(x[:, 0] - x[:, 1]) / np.sqrt(2), atol=1e-10)


def test_projection_lies_on_equilibria(hx):
    x = np.random.default_rng(4).uniform(-3, 3, (20, 2))
    w = project_to_equilibria(hx, x)
    assert np.all(np.abs(poisson_bracket(hx, w)) <= 1e-9)


def test_batched_matches_pointwise(hx):
    x = np.random.default_rng(5).uniform(-3, 3, (7, 2))
    batched = entropy_production(hx, x)
    single = np.array([entropy_production(hx, xi) for xi in x])
    np.testing.assert_array_equal(batched, single)
