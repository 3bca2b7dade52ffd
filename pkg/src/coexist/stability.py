"""Stability and uniqueness functionals for a given attracting rectangle.

The decay condition asks that the long-run average of

    max(Q1(t) - q1(t), Q2(t) - q2(t))

be negative. For time-constant coefficients the integrand is constant and
the average is exact; otherwise the limsup is approximated by the largest
trapezoid average over sliding windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ChemotaxisNotZero
from .params import ModelSpec, check_hypotheses
from .rectangle import Rectangle, chi_zero_rectangle


@dataclass(frozen=True)
class StabilityProfile:
    mu_estimate: float
    window: float
    samples: list  # (t, q1, Q1, q2, Q2); a single row for time-constant coefficients
    verdict: bool
    branch: str
    slack: float = 0.0
    horizon: float = 0.0
    quadrature_dt: float = 0.0
    exact: bool = False


def qQ_profiles(spec: ModelSpec, rect: Rectangle, t):
    """Evaluate (q1, Q1, q2, Q2) at time(s) ``t``.

    Time-dependent inf/sup are taken over x at fixed t, which is exact for
    the cosine spatial profile.
    """
    if not (rect.lo1 > 0 and rect.lo2 > 0 and rect.hi1 > 0 and rect.hi2 > 0):
        raise ValueError("rectangle must be positive")
    c = spec.constants
    lo1, hi1, lo2, hi2 = rect.lo1, rect.hi1, rect.lo2, rect.hi2
    t = np.asarray(t, dtype=float)

    signal_lo = c.k * lo1 + c.l * lo2
    signal_hi = c.k * hi1 + c.l * hi2
    cross = (c.chi1 ** 2 * hi1 ** 2 / c.d1 + c.chi2 ** 2 * hi2 ** 2 / c.d2) / (4.0 * c.lam * c.d3)
    competition = (spec.a2.sup_at(t) * hi1 + spec.b1.sup_at(t) * hi2) / 2.0

    q1 = 2.0 * spec.a1.inf_at(t) * lo1 + spec.a2.inf_at(t) * lo2 + c.chi1 * signal_lo / (2.0 * c.d3)
    Q1 = spec.a0.sup_at(t) + c.chi1 / (2.0 * c.d3) * signal_hi + c.k ** 2 * cross + competition
    q2 = 2.0 * spec.b2.inf_at(t) * lo2 + spec.b1.inf_at(t) * lo1 + c.chi2 * signal_lo / (2.0 * c.d3)
    Q2 = spec.b0.sup_at(t) + c.chi2 / (2.0 * c.d3) * signal_hi + c.l ** 2 * cross + competition

    out = tuple(np.asarray(x, dtype=float) for x in (q1, Q1, q2, Q2))
    if t.ndim == 0:
        return tuple(float(x) for x in out)
    return out


def _curvature_bound(spec: ModelSpec, rect: Rectangle) -> float:
    """Bound on |d^2/dt^2| of Q_i - q_i: sum of |weight * amp| * freq^2 over time sinusoids."""
    def term(fld, weight):
        if fld.is_time_independent:
            return 0.0
        return abs(weight * fld.time_amp) * fld.time_freq ** 2

    lo1, hi1, lo2, hi2 = rect.lo1, rect.hi1, rect.lo2, rect.hi2
    shared = term(spec.a2, hi1 / 2.0) + term(spec.b1, hi2 / 2.0)
    m1 = term(spec.a0, 1.0) + shared + term(spec.a1, 2.0 * lo1) + term(spec.a2, lo2)
    m2 = term(spec.b0, 1.0) + shared + term(spec.b2, 2.0 * lo2) + term(spec.b1, lo1)
    return max(m1, m2)


def default_averaging(spec: ModelSpec) -> tuple[float, float, float]:
    """(window, horizon, quadrature_dt) defaults: 10 periods, 5 windows, period/200."""
    periods = spec.periods()
    if not periods:
        window = 10.0
        return window, 5.0 * window, window / 2000.0
    window = 10.0 * max(periods)
    return window, 5.0 * window, min(periods) / 200.0


def check_average_condition(spec: ModelSpec, rect: Rectangle, horizon: Optional[float] = None,
                            window: Optional[float] = None,
                            quadrature_dt: Optional[float] = None) -> StabilityProfile:
    """Windowed estimate of the long-run average of max(Q1 - q1, Q2 - q2)."""
    d_window, d_horizon, d_dt = default_averaging(spec)
    window = d_window if window is None else float(window)
    horizon = d_horizon if horizon is None else float(horizon)
    quadrature_dt = d_dt if quadrature_dt is None else float(quadrature_dt)
    if not window > 0 or not horizon >= 2.0 * window:
        raise ValueError("need horizon >= 2 * window > 0")
    if not quadrature_dt > 0:
        raise ValueError("quadrature_dt must be positive")

    if spec.is_time_independent:
        q1, Q1, q2, Q2 = qQ_profiles(spec, rect, 0.0)
        mu = max(Q1 - q1, Q2 - q2)
        return StabilityProfile(mu, window, [(0.0, q1, Q1, q2, Q2)], bool(mu < 0.0), rect.branch,
                                0.0, horizon, quadrature_dt, exact=True)

    steps_per_window = max(1, math.ceil(window / quadrature_dt))
    dt = window / steps_per_window
    n = int(round(horizon / dt))
    t = dt * np.arange(n + 1)
    q1, Q1, q2, Q2 = qQ_profiles(spec, rect, t)
    f = np.maximum(Q1 - q1, Q2 - q2)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dt * (f[1:] + f[:-1]))))
    averages = (cum[steps_per_window:] - cum[:-steps_per_window]) / window
    mu = float(np.max(averages))
    slack = 2.0 * dt ** 2 * _curvature_bound(spec, rect) / 12.0
    samples = list(zip(t.tolist(), q1.tolist(), Q1.tolist(), q2.tolist(), Q2.tolist()))
    return StabilityProfile(mu, window, samples, bool(mu + slack < 0.0), rect.branch,
                            slack, horizon, dt, exact=False)


# ---------------------------------------------------------------------------
# the chemotaxis-free corollary


@dataclass(frozen=True)
class CorollaryResult:
    holds: bool
    premise_a: bool
    premise_b: bool
    cond_1_5: bool
    lhs: tuple
    rhs: tuple
    rectangle: Optional[Rectangle] = None
    margins: dict = field(default_factory=dict)


def check_corollary(spec: ModelSpec) -> CorollaryResult:
    """Premises, positivity condition and the two smallness inequalities
    for chemotaxis-free competition, using the quotient rectangle."""
    c = spec.constants
    if c.chi1 != 0.0 or c.chi2 != 0.0:
        raise ChemotaxisNotZero("the corollary concerns the system without chemotaxis")
    a0i, a0s = spec.a0.inf, spec.a0.sup
    a1i, a1s = spec.a1.inf, spec.a1.sup
    a2i, a2s = spec.a2.inf, spec.a2.sup
    b0i, b0s = spec.b0.inf, spec.b0.sup
    b1i, b1s = spec.b1.inf, spec.b1.sup
    b2i, b2s = spec.b2.inf, spec.b2.sup

    premise_a = a0s / a0i < 2.0 * a1i / a1s
    premise_b = b0s / b0i < 2.0 * b2i / b2s
    cond = check_hypotheses(spec).cond_1_5
    rect = chi_zero_rectangle(spec)
    d1 = a1s * b2i - a2s * b1i
    d2 = b2s * a1i - b1s * a2i
    lhs1 = a2s * (rect.hi1 / 2.0 + (2.0 * a1i * b0s - a0s * b1i) / d1) + b1s / 2.0 * rect.hi2 - a2i * rect.lo2
    rhs1 = b2i * (2.0 * a1i * a0i - a0s * a1s) / d1
    lhs2 = b1s * (rect.hi2 / 2.0 + (2.0 * b2i * a0s - b0s * a2i) / d2) + a2s / 2.0 * rect.hi1 - b1i * rect.lo1
    rhs2 = a1i * (2.0 * b2i * b0i - b0s * b2s) / d2
    holds = premise_a and premise_b and cond and lhs1 < rhs1 and lhs2 < rhs2
    margins = {
        "premise_a": 2.0 * a1i / a1s - a0s / a0i,
        "premise_b": 2.0 * b2i / b2s - b0s / b0i,
        "ineq_1": rhs1 - lhs1,
        "ineq_2": rhs2 - lhs2,
    }
    return CorollaryResult(bool(holds), bool(premise_a), bool(premise_b), bool(cond),
                           (lhs1, lhs2), (rhs1, rhs2), rect, margins)
