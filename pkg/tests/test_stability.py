import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from coexist import Rectangle, band_spec, constant_spec
from coexist.errors import ChemotaxisNotZero
from coexist.params import CoefficientField, ModelConstants, ModelSpec
from coexist.stability import check_average_condition, check_corollary, qQ_profiles
from support import chi_zero_specs, symmetric_spec

SQUARE = Rectangle(1.2, 1.2, 1.2, 1.2)


def test_qQ_running_example(symmetric):
    q1, Q1, q2, Q2 = qQ_profiles(symmetric, SQUARE, 0.0)
    # 2*2*1.2 + 0.5*1.2 + 0.1*2.4/2 and 3 + 0.05*2.4 + (0.01*1.44 + 0.01*1.44)/4 + 0.6
    assert q1 == pytest.approx(5.52, abs=1e-14)
    assert Q1 == pytest.approx(3.7272, abs=1e-14)
    assert (q2, Q2) == pytest.approx((q1, Q1), abs=0)


def test_qQ_without_chemotaxis_drops_signal_terms():
    spec = symmetric_spec(chi1=0.0, chi2=0.0)
    _, Q1, _, _ = qQ_profiles(spec, SQUARE, 0.0)
    assert Q1 == 3.0 + (0.5 * 1.2 + 0.5 * 1.2) / 2


def test_qQ_chi_zero_band_reduction():
    spec = band_spec((2.5, 3), (2, 2.2), (0.04, 0.05), (2.5, 3), (0.04, 0.05), (2, 2.2))
    rect = check_corollary(spec).rectangle
    q1, Q1, q2, Q2 = qQ_profiles(spec, rect, 0.0)
    # reduced form: a0s + a2s/2 hi1 + b1s/2 hi2 - 2 a1i lo1 - a2i lo2
    reduced = 3 + 0.025 * rect.hi1 + 0.025 * rect.hi2 - 4 * rect.lo1 - 0.04 * rect.lo2
    assert Q1 - q1 == pytest.approx(reduced, abs=1e-14)
    # 4.85/4.398 and 6.5/4.398 exactly; the 5-digit rounded rectangle gives -1.38129
    assert Q1 - q1 == pytest.approx(3 + 0.05 * 6.5 / 4.398 - 4.04 * 4.85 / 4.398, abs=1e-14)
    assert Q1 - q1 == pytest.approx(-1.38129, abs=5e-5)
    assert rect.lo1 == pytest.approx(1.10277, abs=1e-5) and rect.hi1 == pytest.approx(1.47794, abs=1e-5)


@given(st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0, 1), st.floats(0, 1))
def test_qQ_monotone_in_rectangle(lo1, lo2, w1, w2, d_lo, d_hi):
    spec = symmetric_spec()
    base = Rectangle(lo1, lo1 + w1, lo2, lo2 + w2)
    wider_hi = Rectangle(lo1, lo1 + w1 + d_hi, lo2, lo2 + w2 + d_hi)
    higher_lo = Rectangle(lo1 + d_lo, lo1 + w1 + d_lo, lo2 + d_lo, lo2 + w2 + d_lo)
    q1, Q1, q2, Q2 = qQ_profiles(spec, base, 0.0)
    _, Q1h, _, Q2h = qQ_profiles(spec, wider_hi, 0.0)
    q1l, _, q2l, _ = qQ_profiles(spec, higher_lo, 0.0)
    assert Q1h >= Q1 and Q2h >= Q2
    assert q1l >= q1 and q2l >= q2


def test_qQ_rejects_nonpositive_rectangle(symmetric):
    with pytest.raises(ValueError):
        qQ_profiles(symmetric, Rectangle(0.0, 1.0, 0.5, 1.0), 0.0)


def test_average_condition_constant_is_exact(symmetric):
    prof = check_average_condition(symmetric, SQUARE)
    assert prof.exact and prof.slack == 0.0
    assert prof.mu_estimate == pytest.approx(3.7272 - 5.52, abs=1e-14)
    assert prof.verdict


def test_average_condition_window_independent_for_constants(symmetric):
    ref = check_average_condition(symmetric, SQUARE).mu_estimate
    for window, horizon in ((1.0, 2.0), (3.0, 17.0), (50.0, 100.0)):
        assert check_average_condition(symmetric, SQUARE, horizon, window).mu_estimate == ref


def test_average_condition_fails_for_large_growth_rate():
    spec = constant_spec(10, 2, 0.5, 3, 0.5, 2, chi1=0.1, chi2=0.1)
    assert not check_average_condition(spec, SQUARE).verdict


def test_average_condition_periodic_matches_period_mean():
    one = CoefficientField.constant
    a0 = CoefficientField(mean=3.0, time_amp=0.5, time_freq=1.0)
    spec = ModelSpec(ModelConstants(1, 1, 1, 0.1, 0.1, 1, 1, 1), a0, one(2), one(0.5), one(3), one(0.5), one(2))
    rect = Rectangle(1.0, 1.5, 1.0, 1.5)

    def integrand(t):
        q1, Q1, q2, Q2 = qQ_profiles(spec, rect, t)
        return max(Q1 - q1, Q2 - q2)

    exact = quad(integrand, 0, 2 * np.pi, limit=200, epsabs=1e-13)[0] / (2 * np.pi)
    prof = check_average_condition(spec, rect)
    assert abs(prof.mu_estimate - exact) <= 1.0 / prof.window
    assert abs(prof.mu_estimate - exact) <= prof.slack  # windows span whole periods


def test_average_condition_argument_checks(symmetric):
    with pytest.raises(ValueError):
        check_average_condition(symmetric, SQUARE, horizon=1.0, window=1.0)
    with pytest.raises(ValueError):
        check_average_condition(symmetric, SQUARE, quadrature_dt=0.0)


def test_corollary_small_competition():
    spec = band_spec((2.5, 3), (2, 2.2), (0.04, 0.05), (2.5, 3), (0.04, 0.05), (2, 2.2))
    res = check_corollary(spec)
    assert res.holds
    assert res.lhs[0] == pytest.approx(0.16485, abs=1e-5)
    assert res.rhs[0] == pytest.approx(1.54616, abs=1e-5)


def test_corollary_boundary_case_by_direct_evaluation():
    # a2, b1 in [0.4, 0.5]: both sides equal 17/10.5 in exact arithmetic
    spec = band_spec((2.5, 3), (2, 2.2), (0.4, 0.5), (2.5, 3), (0.4, 0.5), (2, 2.2))
    res = check_corollary(spec)
    lo1, hi1, lo2, hi2 = 5 / 6, 4 / 3, 5 / 6, 4 / 3
    lhs = 0.5 * (hi1 / 2 + (2 * 2 * 3 - 3 * 0.4) / (2.2 * 2 - 0.5 * 0.4)) + 0.5 / 2 * hi2 - 0.4 * lo2
    rhs = 2 * (2 * 2 * 2.5 - 3 * 2.2) / (2.2 * 2 - 0.5 * 0.4)
    assert res.lhs[0] == pytest.approx(lhs, abs=1e-14)
    assert res.rhs[0] == pytest.approx(rhs, abs=1e-14)
    assert abs(res.margins["ineq_1"]) < 1e-12
    assert res.holds == (res.lhs[0] < res.rhs[0] and res.lhs[1] < res.rhs[1])


def test_corollary_without_competition():
    spec = band_spec((2.5, 3), (2, 2.2), (1e-300, 1e-300), (2.5, 3), (1e-300, 1e-300), (2, 2.2))
    assert check_corollary(spec).holds


def test_corollary_needs_zero_chemotaxis(symmetric):
    with pytest.raises(ChemotaxisNotZero):
        check_corollary(symmetric)


def test_corollary_implies_average_condition():
    specs = [s for s in chi_zero_specs(11, 400) if check_corollary(s).holds][:30]
    assert len(specs) >= 10
    for spec in specs:
        rect = check_corollary(spec).rectangle
        assert check_average_condition(spec, rect).verdict
