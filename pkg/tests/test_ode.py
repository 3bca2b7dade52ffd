import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coexist import band_spec, constant_spec
from coexist.errors import HypothesisNotMet, InvalidSpec, NonPositiveComponent, PullbackNotConverged, StepUnstable
from coexist.ode import (
    LYAPUNOV_SLACK,
    OdeState2,
    OdeState4,
    Trajectory,
    lyapunov_ratio,
    pullback_entire_solution,
    solve_comparison4,
    solve_lv,
)
from support import h7_band_spec, symmetric_spec


def logistic_exact(u0, r, K, t):
    return K / (1 + (K / u0 - 1) * np.exp(-r * t))


def test_comparison_logistic_limit():
    spec = constant_spec(3, 2, 1e-300, 3, 1e-300, 2)
    traj = solve_comparison4(spec, OdeState4(2.0, 0.5, 2.0, 0.5), 0.0, 20.0, 1e-2)
    assert traj.final == pytest.approx([1.5] * 4, abs=1e-10)


def test_lv_logistic_matches_exact_solution():
    spec = constant_spec(3, 2, 1e-300, 3, 1e-300, 2)
    traj = solve_lv(spec, OdeState2(0.2, 0.2), 0.0, 5.0, 1e-2)
    assert np.max(np.abs(traj["u"] - logistic_exact(0.2, 3.0, 1.5, traj.t))) < 1e-8


def test_collapsed_envelope_equals_lv_bitwise(symmetric):
    four = solve_comparison4(symmetric, OdeState4(0.7, 0.7, 2.0, 2.0), 0.0, 5.0, 1e-3)
    two = solve_lv(symmetric, OdeState2(0.7, 2.0), 0.0, 5.0, 1e-3)
    assert np.array_equal(four["u_hi"], two["u"]) and np.array_equal(four["u_lo"], two["u"])
    assert np.array_equal(four["v_hi"], two["v"]) and np.array_equal(four["v_lo"], two["v"])


def test_collapsed_envelope_equals_lv_periodic():
    spec = h7_band_spec()
    four = solve_comparison4(spec, OdeState4(0.3, 0.3, 1.7, 1.7), 0.0, 8.0, 1e-3)
    two = solve_lv(spec, OdeState2(0.3, 1.7), 0.0, 8.0, 1e-3)
    assert np.array_equal(four.y[:, [0, 2]], two.y)


def test_running_example_envelope_converges_to_rectangle(symmetric):
    traj = solve_comparison4(symmetric, OdeState4(3.0, 0.1, 2.5, 0.2), 0.0, 60.0, 1e-3, save_every=1000)
    half = solve_comparison4(symmetric, OdeState4(3.0, 0.1, 2.5, 0.2), 0.0, 60.0, 5e-4, save_every=2000)
    assert traj.final == pytest.approx([1.2] * 4, abs=1e-6)
    assert traj.final == pytest.approx(half.final, abs=1e-10)
    assert traj.ordering_violation() <= 0


def test_lv_symmetric_equilibrium():
    spec = constant_spec(3, 2, 1, 3, 1, 2)
    traj = solve_lv(spec, OdeState2(0.3, 2.0), 0.0, 30.0, 1e-2)
    assert traj.final == pytest.approx([1.0, 1.0], abs=1e-10)


def test_lv_periodic_attractor_pairs_converge():
    spec = h7_band_spec()
    a = solve_lv(spec, OdeState2(0.1, 0.1), 0.0, 100.0, 1e-3, save_every=1000)
    b = solve_lv(spec, OdeState2(10.0, 10.0), 0.0, 100.0, 1e-3, save_every=1000)
    assert np.max(np.abs(a.final - b.final)) < 1e-8


def test_rk4_fourth_order():
    spec = constant_spec(3, 2, 0.5, 3, 0.5, 2)
    init = OdeState2(0.2, 0.9)
    ref = solve_lv(spec, init, 0.0, 2.0, 1e-4).final
    e1 = np.max(np.abs(solve_lv(spec, init, 0.0, 2.0, 0.04).final - ref))
    e2 = np.max(np.abs(solve_lv(spec, init, 0.0, 2.0, 0.02).final - ref))
    assert 12 < e1 / e2 < 20


def test_step_unstable_on_blowup():
    spec = constant_spec(3, 2, 0.5, 3, 0.5, 2)
    with pytest.raises(StepUnstable):
        solve_lv(spec, OdeState2(50.0, 50.0), 0.0, 1.0, 0.5)


def test_lv_needs_homogeneous_coefficients():
    spec = band_spec((2.5, 3), (2, 2.2), (0.4, 0.5), (2.5, 3), (0.4, 0.5), (2, 2.2))
    with pytest.raises(InvalidSpec):
        solve_lv(spec, OdeState2(1, 1), 0, 1, 0.1)


def test_comparison_rejects_unordered_init(symmetric):
    with pytest.raises(ValueError):
        solve_comparison4(symmetric, OdeState4(0.5, 1.0, 1.0, 0.5), 0, 1, 0.1)


@settings(deadline=None, max_examples=25)
@given(st.floats(0.05, 3), st.floats(0, 2), st.floats(0.05, 3), st.floats(0, 2))
def test_ordering_preserved(u_lo, du, v_lo, dv):
    spec = band_spec((2.5, 3.5), (2, 2.2), (0.4, 0.5), (2.5, 3.5), (0.4, 0.5), (2, 2.2),
                     realize="space", chi1=0.1, chi2=0.1)
    traj = solve_comparison4(spec, OdeState4(u_lo + du, u_lo, v_lo + dv, v_lo), 0.0, 5.0, 1e-2)
    assert traj.ordering_violation() <= 0.0


# -- pullback ----------------------------------------------------------------

def test_pullback_constant_equilibrium():
    spec = constant_spec(3, 2, 1, 3, 1, 2)
    res = pullback_entire_solution(spec, 50.0, [0.0, 1.0, 2.0], dt=1e-2)
    assert res.u == pytest.approx([1, 1, 1], abs=1e-12)
    assert res.v == pytest.approx([1, 1, 1], abs=1e-12)
    assert res.w == pytest.approx([2, 2, 2], abs=1e-12)
    assert res.passed


def test_pullback_periodic_satisfies_ode():
    spec = h7_band_spec()
    grid = np.arange(0.0, 6.0 + 1e-12, 1e-3)
    res = pullback_entire_solution(spec, 40.0, grid, dt=1e-3)
    du = np.gradient(res.u, grid, edge_order=2)
    dv = np.gradient(res.v, grid, edge_order=2)
    a0 = spec.a0(grid)
    b0 = spec.b0(grid)
    ru = du - res.u * (a0 - 2.0 * res.u - 0.5 * res.v)
    rv = dv - res.v * (b0 - 0.5 * res.u - 2.0 * res.v)
    assert np.max(np.abs(ru)) < 1e-6 and np.max(np.abs(rv)) < 1e-6
    c = spec.constants
    assert np.array_equal(res.w, (c.k * res.u + c.l * res.v) / c.lam)


def test_pullback_horizon_doubling_is_stable():
    spec = h7_band_spec()
    grid = np.linspace(0, 10, 21)
    a = pullback_entire_solution(spec, 30.0, grid)
    b = pullback_entire_solution(spec, 60.0, grid)
    assert np.max(np.abs(a.u - b.u)) < 1e-8 and np.max(np.abs(a.v - b.v)) < 1e-8


def test_pullback_short_horizon_fails():
    with pytest.raises(PullbackNotConverged) as info:
        pullback_entire_solution(h7_band_spec(), 0.5, [0.0, 1.0])
    assert info.value.deviation >= 1e-8


def test_pullback_needs_positivity_condition():
    spec = constant_spec(1, 1, 2, 3, 2, 1)
    with pytest.raises(HypothesisNotMet):
        pullback_entire_solution(spec, 10.0, [0.0])


# -- Lyapunov ratio ----------------------------------------------------------

def test_lyapunov_zero_when_collapsed(symmetric):
    traj = solve_comparison4(symmetric, OdeState4(0.8, 0.8, 1.5, 1.5), 0.0, 3.0, 1e-2)
    assert np.all(lyapunov_ratio(traj) == 0.0)


def test_lyapunov_initial_value(symmetric):
    traj = solve_comparison4(symmetric, OdeState4(2.0, 0.5, 3.0, 0.25), 0.0, 1.0, 1e-2)
    assert lyapunov_ratio(traj)[0] == pytest.approx(np.log(4.0) + np.log(12.0), abs=1e-15)


def test_lyapunov_nonincreasing_under_h7():
    traj = solve_comparison4(h7_band_spec(), OdeState4(2, 0.5, 2, 0.5), 0.0, 30.0, 1e-3, save_every=10)
    L = lyapunov_ratio(traj)
    assert np.all(np.diff(L) <= LYAPUNOV_SLACK)
    assert L[-1] < 1e-6 * L[0]


def test_lyapunov_rejects_zero_component():
    traj = Trajectory(np.array([0.0]), np.array([[1.0, 0.0, 1.0, 1.0]]), ("u_hi", "u_lo", "v_hi", "v_lo"))
    with pytest.raises(NonPositiveComponent):
        lyapunov_ratio(traj)
