import numpy as np
import pytest

from conftest import LN2, transition_spec
from iphs_opt.core import Box, CostWeights, distance_to_equilibria, entropy_production
from iphs_opt.errors import ConfigurationError
from iphs_opt.ocp import OcpSpec, TerminalPoint
from iphs_opt.sim import Trajectory
from iphs_opt.turnpike import (
    certificate_violations,
    distance_series,
    horizon_sweep,
    integral_dist_sq,
    lemma_certificate,
    measure_above,
    mid_window,
    sample_box,
)


def line(t_f, nodes=2001):
    """x(t) = (t, 0): distance |t| / sqrt(2) to the diagonal."""
    t = np.linspace(0, t_f, nodes)
    return Trajectory(t, np.column_stack([t, np.zeros_like(t)]), np.zeros(nodes - 1))


def resting(value=0.3, t_f=2.0):
    t = np.linspace(0, t_f, 11)
    return Trajectory(t, np.full((11, 2), value), np.zeros(10))


def test_straight_line_series(hx):
    traj = line(1.0)
    np.testing.assert_allclose(distance_series(hx, traj), traj.t / np.sqrt(2), rtol=1e-15)


def test_straight_line_integral(hx):
    assert integral_dist_sq(hx, line(1.0)) == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_straight_line_measure(hx):
    assert measure_above(hx, line(2.0, nodes=8), 1 / np.sqrt(2)) == pytest.approx(1.0, rel=1e-12)
    assert measure_above(hx, line(2.0, nodes=101), 1 / np.sqrt(2)) == pytest.approx(1.0, rel=1e-12)


def test_resting_trajectory(hx):
    traj = resting()
    assert np.all(distance_series(hx, traj) == 0.0)
    assert integral_dist_sq(hx, traj) == 0.0
    for eps in (1e-3, 0.1, 1.0):
        assert measure_above(hx, traj, eps) == 0.0


def test_measure_validation(hx):
    with pytest.raises(ConfigurationError):
        measure_above(hx, line(1.0), 0.0)


def test_mid_window():
    mask = mid_window(np.linspace(0, 4, 9))
    np.testing.assert_array_equal(np.flatnonzero(mask), [2, 3, 4, 5, 6])


def test_resting_sweep(hx):
    spec = OcpSpec(hx, np.full(2, 0.5), TerminalPoint(np.full(2, 0.5)), 1.0, Box([-10.0], [10.0]),
                   CostWeights.entropy())
    rep = horizon_sweep(spec, [2.0, 4.0])
    assert rep.passed
    for row in rep.rows:
        assert row.integral_dist_sq == pytest.approx(0.0, abs=1e-12)
        assert row.objective == pytest.approx(0.0, abs=1e-6)
        assert row.mid_max_abs_u == pytest.approx(0.0, abs=1e-6)
        assert all(v == pytest.approx(0.0, abs=1e-12) for v in row.measure_above.values())


@pytest.fixture(scope="module")
def sweep(hx):
    return horizon_sweep(transition_spec(hx, 5.0), [5.0, 10.0, 20.0, 40.0])


def test_sweep_flags(sweep):
    assert sweep.flags["all_converged"]
    assert sweep.flags["control_turnpike"]
    assert sweep.flags["velocity_turnpike"]
    assert sweep.flags["chebyshev"]


def test_sweep_integral_does_not_stabilize(sweep):
    """The optimal integral keeps shrinking with t_f, so the stabilization flag is honestly red."""
    I20, I40 = sweep.rows[-2].integral_dist_sq, sweep.rows[-1].integral_dist_sq
    assert sweep.stabilization == pytest.approx(1 - I40 / I20, rel=1e-12)
    assert sweep.stabilization > 0.4
    assert not sweep.flags["integral_stabilization"] and not sweep.passed


def test_sweep_rows(sweep):
    rows = sweep.rows
    mid_u = [r.mid_max_abs_u for r in rows]
    assert all(b < a for a, b in zip(mid_u, mid_u[1:]))
    for r in rows:
        assert 0 <= r.integral_dist_sq
        assert all(0 <= m <= r.t_f for m in r.measure_above.values())
        assert r.terminal_error <= 1e-6
    assert sweep.C_K == max(r.integral_dist_sq for r in rows)


def test_sweep_integral_decays_like_inverse_horizon(sweep):
    """Constant-velocity optimum: int dist^2 ~ ln^2(1 + v) t_f / 2 with v = ln 20 / t_f."""
    for r in sweep.rows[1:]:
        v = np.log(20) / r.t_f
        assert r.integral_dist_sq == pytest.approx(np.log1p(v) ** 2 * r.t_f / 2, rel=0.1)


def test_sweep_boundary_layer(sweep, hx):
    """Mid-horizon distance stays below the distance near the ends."""
    for t_f, (_, fine) in sweep.trajectories.items():
        d = distance_series(hx, fine)
        mid = mid_window(fine.t)
        edge = (fine.t <= 0.25 * t_f) | (fine.t >= 0.75 * t_f)
        assert d[mid].mean() <= d[edge].max()


def test_sweep_parallel_matches_serial(hx, monkeypatch):
    monkeypatch.setenv("IPHS_OPT_THREADS", "2")
    spec = transition_spec(hx, 5.0)
    a = horizon_sweep(spec, [5.0, 6.0], warm_start=False)
    b = horizon_sweep(spec, [5.0, 6.0], warm_start=False)
    assert a.to_dict() == b.to_dict()
    assert a.flags["all_converged"]


def test_sweep_records_failures(hx):
    rep = horizon_sweep(transition_spec(hx, 5.0), [0.01, 5.0])
    assert rep.rows[0].status != "converged" and rep.rows[1].status == "converged"
    assert not rep.flags["all_converged"]


# certificate -------------------------------------------------------------------------

def test_certificate_spot_value(hx):
    cert = lemma_certificate(hx, Box([-1.0, -1.0], [3.0, 3.0]), 10_000)
    assert cert.valid
    ratio = entropy_production(hx, [0.0, LN2]) / distance_to_equilibria(hx, [0.0, LN2]) ** 2
    assert ratio == pytest.approx(0.5 / (LN2 ** 2 / 2), rel=1e-14)
    assert cert.brackets(ratio)


def test_certificate_against_closed_form(hx):
    """On the heat exchanger R / dist^2 = 8 sinh^2(d/2) / d^2 with d = S1 - S2."""
    cert = lemma_certificate(hx, Box([-1.0, -1.0], [3.0, 3.0]), 10_000)
    f = lambda d: 8 * np.sinh(d / 2) ** 2 / d ** 2
    assert 2.0 <= cert.c_lower <= f(0.1)
    assert f(3.5) <= cert.c_upper <= f(4.0)
    # H_x = exp(x) componentwise: Lipschitz ratios between e^-1 and e^3
    assert np.exp(-1) <= cert.lip_lower and cert.lip_upper <= np.exp(3)


def test_quadratic_certificate_is_exact(quad):
    cert = lemma_certificate(quad, Box([-3.0, -3.0], [3.0, 3.0]), 5000)
    assert cert.c_lower == pytest.approx(2.0, rel=1e-12)
    assert cert.c_upper == pytest.approx(2.0, rel=1e-12)
    assert cert.lip_lower == pytest.approx(1.0, rel=1e-12) and cert.lip_upper == pytest.approx(1.0, rel=1e-12)


def test_certificate_shrinking_box(hx):
    widths = [1.0, 0.1, 0.01]
    spreads = []
    for w in widths:
        c = np.array([0.0, 1.0])
        cert = lemma_certificate(hx, Box(c - w, c + w), 2000)
        spreads.append(cert.c_upper / cert.c_lower)
    assert spreads[0] > spreads[1] > spreads[2] and spreads[2] < 1.01


def test_monotone_exhaustion(hx):
    K = Box([-1.0, -1.0], [3.0, 3.0])
    certs = [lemma_certificate(hx, K, n) for n in (1000, 4000, 10_000)]
    for a, b in zip(certs, certs[1:]):
        assert b.c_lower <= a.c_lower and b.c_upper >= a.c_upper
        assert b.lip_lower <= a.lip_lower and b.lip_upper >= a.lip_upper


def test_certificate_soundness(hx):
    cert = lemma_certificate(hx, Box([-1.0, -1.0], [3.0, 3.0]), 10_000)
    assert certificate_violations(hx, cert) == {"lower": 0, "upper": 0, "lip_lower": 0, "lip_upper": 0}


def test_certificate_counts_equilibrium_samples(quad):
    # a degenerate box on the diagonal: every sample is an equilibrium
    cert = lemma_certificate(quad, Box([1.0, 1.0], [1.0, 1.0]), 1000)
    assert cert.n_skipped == 1000 and not cert.valid


def test_sample_box_nested():
    K = Box([0.0, -1.0], [1.0, 2.0])
    a = sample_box(K, 100, seed=3)
    b = sample_box(K, 400, seed=3)
    np.testing.assert_array_equal(a, b[:100])
    assert np.all(K.contains(b))


def test_certificate_requires_domain(hx):
    with pytest.raises(ConfigurationError):
        lemma_certificate(hx, Box([-6.0, -1.0], [3.0, 3.0]), 1000)
