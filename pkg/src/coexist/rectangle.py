"""Optimal attracting rectangles: monotone iteration and closed-form elimination.

Two families are supported. Branch ``"R"`` uses the chemotaxis-corrected
logistic comparison (valid under H5), branch ``"S"`` the coupled comparison
(valid under H6). Each rectangle is the fixed point of

    hi = F(lo),    lo = G(hi)

with F, G affine and antitone, so starting from lo = 0, hi = (ultimate
bound) the iterates squeeze monotonically onto the fixed point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import HypothesisNotMet, NonUniqueSystem, NotConstantCoefficients, NotConverged
from .params import ModelSpec, check_hypotheses, derive_bounds

BRANCHES = ("R", "S")


@dataclass(frozen=True)
class Rectangle:
    lo1: float
    hi1: float
    lo2: float
    hi2: float
    branch: str = "R"

    def as_tuple(self) -> tuple:
        return (self.lo1, self.hi1, self.lo2, self.hi2)

    def violations(self, spec: Optional[ModelSpec] = None) -> list[str]:
        """Broken rectangle invariants (empty list when valid)."""
        out = []
        if not self.lo1 > 0.0:
            out.append(f"lo1 = {self.lo1!r} is not positive")
        if not self.lo2 > 0.0:
            out.append(f"lo2 = {self.lo2!r} is not positive")
        if not self.lo1 <= self.hi1:
            out.append(f"lo1 > hi1 ({self.lo1!r} > {self.hi1!r})")
        if not self.lo2 <= self.hi2:
            out.append(f"lo2 > hi2 ({self.lo2!r} > {self.hi2!r})")
        if spec is not None:
            b = derive_bounds(spec)
            caps = (b.A_bar_1, b.A_bar_2) if self.branch == "R" else (b.B_bar_1, b.B_bar_2)
            for i, (hi, cap) in enumerate(zip((self.hi1, self.hi2), caps), start=1):
                if cap is None:
                    out.append(f"ultimate bound {i} undefined")
                elif hi > cap:
                    out.append(f"hi{i} = {hi!r} exceeds ultimate bound {cap!r}")
        return out

    def contains(self, u, v, slack: float = 0.0) -> bool:
        u = np.asarray(u)
        v = np.asarray(v)
        return bool(np.all(u >= self.lo1 - slack) and np.all(u <= self.hi1 + slack)
                    and np.all(v >= self.lo2 - slack) and np.all(v <= self.hi2 + slack))


@dataclass
class IterationTrace:
    quads: list = field(default_factory=list)  # (lo1, hi1, lo2, hi2) per iterate
    residual: float = float("nan")
    converged: bool = False
    iterations: int = 0

    def is_monotone(self) -> bool:
        """lo components nondecreasing, hi components nonincreasing, exactly."""
        q = np.asarray(self.quads)
        if len(q) < 2:
            return True
        d = np.diff(q, axis=0)
        return bool(np.all(d[:, 0] >= 0) and np.all(d[:, 2] >= 0)
                    and np.all(d[:, 1] <= 0) and np.all(d[:, 3] <= 0))


@dataclass(frozen=True)
class ClosedFormCoefficients:
    """Coefficients of the decoupled systems

        h_bar_1 hi1 = h_bar_2 + h_bar_3 hi2,   p_bar_1 hi2 = p_bar_2 + p_bar_3 hi1
        h_lo_1  lo1 = h_lo_2  + h_lo_3  lo2,   p_lo_1  lo2 = p_lo_2  + p_lo_3  lo1
    """

    h_bar_1: float
    h_bar_2: float
    h_bar_3: float
    p_bar_1: float
    p_bar_2: float
    p_bar_3: float
    h_lo_1: float
    h_lo_2: float
    h_lo_3: float
    p_lo_1: float
    p_lo_2: float
    p_lo_3: float
    branch: str = "R"

    @property
    def det_bar(self) -> float:
        return self.h_bar_1 * self.p_bar_1 - self.h_bar_3 * self.p_bar_3

    @property
    def det_lo(self) -> float:
        return self.h_lo_1 * self.p_lo_1 - self.h_lo_3 * self.p_lo_3

    def relation_residuals(self, rect: Rectangle) -> tuple:
        return (
            self.h_bar_1 * rect.hi1 - self.h_bar_2 - self.h_bar_3 * rect.hi2,
            self.p_bar_1 * rect.hi2 - self.p_bar_2 - self.p_bar_3 * rect.hi1,
            self.h_lo_1 * rect.lo1 - self.h_lo_2 - self.h_lo_3 * rect.lo2,
            self.p_lo_1 * rect.lo2 - self.p_lo_2 - self.p_lo_3 * rect.lo1,
        )


@dataclass(frozen=True)
class ClosedFormResult:
    rectangle: Rectangle
    coefficients: ClosedFormCoefficients
    violations: tuple = ()

    @property
    def valid(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# the fixed-point maps


class _Terms:
    """Bounds and chemotactic ratios unpacked once."""

    def __init__(self, spec: ModelSpec):
        c = spec.constants
        self.k1, self.k2, self.l1, self.l2 = c.kappa1, c.kappa2, c.ell1, c.ell2
        self.a0i, self.a0s = spec.a0.inf, spec.a0.sup
        self.a1i, self.a1s = spec.a1.inf, spec.a1.sup
        self.a2i, self.a2s = spec.a2.inf, spec.a2.sup
        self.b0i, self.b0s = spec.b0.inf, spec.b0.sup
        self.b1i, self.b1s = spec.b1.inf, spec.b1.sup
        self.b2i, self.b2s = spec.b2.inf, spec.b2.sup
        # effective self-limitation rates
        self.Ai = self.a1i - self.k1
        self.As = self.a1s - self.k1
        self.Bi = self.b2i - self.l2
        self.Bs = self.b2s - self.l2
        self.Di = self.Ai * self.Bi - self.k2 * self.l1
        self.Ds = self.As * self.Bs - self.k2 * self.l1


def _upper_R(T: _Terms, lo1, lo2):
    hi1 = (T.a0s - T.a2i * lo2 - T.k1 * lo1) / T.Ai
    hi2 = (T.b0s - T.b1i * lo1 - T.l2 * lo2) / T.Bi
    return hi1, hi2


def _lower_R(T: _Terms, hi1, hi2):
    lo1 = (T.a0i - T.a2s * hi2 - T.k1 * hi1) / T.As
    lo2 = (T.b0i - T.b1s * hi1 - T.l2 * hi2) / T.Bs
    return lo1, lo2


def _upper_S(T: _Terms, lo1, lo2):
    pu = T.a0s - (T.a2i + T.l1) * lo2 - T.k1 * lo1
    pv = T.b0s - (T.b1i + T.k2) * lo1 - T.l2 * lo2
    return (pu * T.Bi + T.l1 * pv) / T.Di, (pv * T.Ai + T.k2 * pu) / T.Di


def _lower_S(T: _Terms, hi1, hi2):
    pu = T.a0i - (T.a2s + T.l1) * hi2 - T.k1 * hi1
    pv = T.b0i - (T.b1s + T.k2) * hi1 - T.l2 * hi2
    return (pu * T.Bs + T.l1 * pv) / T.Ds, (pv * T.As + T.k2 * pu) / T.Ds


_MAPS = {"R": (_upper_R, _lower_R), "S": (_upper_S, _lower_S)}


def _check_branch(branch):
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")


def fixed_point_residual(spec: ModelSpec, rect: Rectangle) -> float:
    """Max violation of the four fixed-point equations at ``rect``."""
    _check_branch(rect.branch)
    T = _Terms(spec)
    upper, lower = _MAPS[rect.branch]
    hi1, hi2 = upper(T, rect.lo1, rect.lo2)
    lo1, lo2 = lower(T, rect.hi1, rect.hi2)
    return max(abs(rect.hi1 - hi1), abs(rect.hi2 - hi2), abs(rect.lo1 - lo1), abs(rect.lo2 - lo2))


def iterate_rectangle(spec: ModelSpec, branch: str = "R", tol: float = 1e-12,
                      max_iter: int = 10_000) -> tuple[Rectangle, IterationTrace]:
    """Squeeze the attracting rectangle by monotone iteration.

    Raises NotConverged (with the trace attached) if the change does not drop
    below ``tol`` within ``max_iter`` steps or if an iterate inverts
    (lo > hi).
    """
    _check_branch(branch)
    if not tol > 0:
        raise ValueError("tol must be positive")
    report = check_hypotheses(spec)
    if branch == "R" and not report.h5:
        raise HypothesisNotMet("branch R requires H5")
    if branch == "S" and not report.h6:
        raise HypothesisNotMet("branch S requires H6")
    if branch == "R":
        hi1, hi2 = report.A_bar_1, report.A_bar_2
    else:
        hi1, hi2 = report.B_bar_1, report.B_bar_2
    T = _Terms(spec)
    upper, lower = _MAPS[branch]
    lo1 = lo2 = 0.0
    trace = IterationTrace(quads=[(lo1, hi1, lo2, hi2)])
    for n in range(1, max_iter + 1):
        new_hi1, new_hi2 = upper(T, lo1, lo2)
        new_lo1, new_lo2 = lower(T, new_hi1, new_hi2)
        change = max(abs(new_lo1 - lo1), abs(new_hi1 - hi1), abs(new_lo2 - lo2), abs(new_hi2 - hi2))
        lo1, hi1, lo2, hi2 = new_lo1, new_hi1, new_lo2, new_hi2
        trace.quads.append((lo1, hi1, lo2, hi2))
        trace.iterations = n
        if lo1 > hi1 or lo2 > hi2:
            trace.residual = fixed_point_residual(spec, Rectangle(lo1, hi1, lo2, hi2, branch))
            raise NotConverged(f"iterate {n} inverted (lo > hi): hypothesis margin too thin", trace)
        if change < tol:
            trace.converged = True
            break
    rect = Rectangle(lo1, hi1, lo2, hi2, branch)
    trace.residual = fixed_point_residual(spec, rect)
    if not trace.converged:
        raise NotConverged(f"no convergence to tol={tol:g} within {max_iter} iterations", trace)
    return rect, trace


# ---------------------------------------------------------------------------
# closed form


def _coefficients_R(T: _Terms) -> ClosedFormCoefficients:
    # Lower equations substituted into the upper ones (and vice versa), then
    # cleared of denominators.
    k1, l2 = T.k1, T.l2
    Ai, As, Bi, Bs = T.Ai, T.As, T.Bi, T.Bs
    return ClosedFormCoefficients(
        h_bar_1=Bs * (Ai * As - k1 ** 2) - T.a2i * T.b1s * As,
        h_bar_2=Bs * (T.a0s * As - k1 * T.a0i) - T.a2i * T.b0i * As,
        h_bar_3=l2 * T.a2i * As + k1 * T.a2s * Bs,
        p_bar_1=As * (Bi * Bs - l2 ** 2) - T.b1i * T.a2s * Bs,
        p_bar_2=As * (T.b0s * Bs - l2 * T.b0i) - T.b1i * T.a0i * Bs,
        p_bar_3=k1 * T.b1i * Bs + l2 * T.b1s * As,
        h_lo_1=Bi * (Ai * As - k1 ** 2) - T.a2s * T.b1i * Ai,
        h_lo_2=Bi * (T.a0i * Ai - k1 * T.a0s) - T.a2s * T.b0s * Ai,
        h_lo_3=l2 * T.a2s * Ai + k1 * T.a2i * Bi,
        p_lo_1=Ai * (Bi * Bs - l2 ** 2) - T.b1s * T.a2i * Bi,
        p_lo_2=Ai * (T.b0i * Bi - l2 * T.b0s) - T.b1s * T.a0s * Bi,
        p_lo_3=k1 * T.b1s * Bi + l2 * T.b1i * Ai,
        branch="R",
    )


def _affine_S(T: _Terms):
    """(c_up, M_up, c_lo, M_lo) with hi = c_up + M_up lo and lo = c_lo + M_lo hi."""
    def affine(a0, a2, b0, b1, A, B, D):
        c = np.array([a0 * B + T.l1 * b0, b0 * A + T.k2 * a0]) / D
        M = np.array([
            [-T.k1 * B - T.l1 * (b1 + T.k2), -(a2 + T.l1) * B - T.l1 * T.l2],
            [-(b1 + T.k2) * A - T.k2 * T.k1, -T.l2 * A - T.k2 * (a2 + T.l1)],
        ]) / D
        return c, M

    c_up, M_up = affine(T.a0s, T.a2i, T.b0s, T.b1i, T.Ai, T.Bi, T.Di)
    c_lo, M_lo = affine(T.a0i, T.a2s, T.b0i, T.b1s, T.As, T.Bs, T.Ds)
    return c_up, M_up, c_lo, M_lo


def _coefficients_S(T: _Terms) -> ClosedFormCoefficients:
    c_up, M_up, c_lo, M_lo = _affine_S(T)
    # hi = c_up + M_up (c_lo + M_lo hi)  ->  (I - M_up M_lo) hi = c_up + M_up c_lo
    P = M_up @ M_lo
    r = c_up + M_up @ c_lo
    Q = M_lo @ M_up
    s = c_lo + M_lo @ c_up
    return ClosedFormCoefficients(
        h_bar_1=1.0 - P[0, 0], h_bar_2=r[0], h_bar_3=P[0, 1],
        p_bar_1=1.0 - P[1, 1], p_bar_2=r[1], p_bar_3=P[1, 0],
        h_lo_1=1.0 - Q[0, 0], h_lo_2=s[0], h_lo_3=Q[0, 1],
        p_lo_1=1.0 - Q[1, 1], p_lo_2=s[1], p_lo_3=Q[1, 0],
        branch="S",
    )


def closed_form_coefficients(spec: ModelSpec, branch: str = "R") -> ClosedFormCoefficients:
    _check_branch(branch)
    T = _Terms(spec)
    coeffs = _coefficients_R(T) if branch == "R" else _coefficients_S(T)
    return ClosedFormCoefficients(**{
        name: (float(value) if isinstance(value, (float, np.floating)) else value)
        for name, value in coeffs.__dict__.items()
    })


def closed_form_rectangle(spec: ModelSpec, det_tol: float = 1e-10, branch: str = "R") -> ClosedFormResult:
    """Solve the two decoupled 2x2 systems for the rectangle.

    The determinant test is relative: a system counts as singular when
    ``|h1 p1 - h3 p3| < det_tol * max(|h1 p1|, |h3 p3|)``. Positivity and
    ordering are not enforced; violations are listed on the result.
    """
    coeffs = closed_form_coefficients(spec, branch)
    c = coeffs
    for label, det, scale in (
        ("upper", c.det_bar, max(abs(c.h_bar_1 * c.p_bar_1), abs(c.h_bar_3 * c.p_bar_3))),
        ("lower", c.det_lo, max(abs(c.h_lo_1 * c.p_lo_1), abs(c.h_lo_3 * c.p_lo_3))),
    ):
        if abs(det) < det_tol * scale or det == 0.0:
            raise NonUniqueSystem(
                f"{label} system is singular: determinant {det!r} (scale {scale!r})", coeffs
            )
    hi1 = (c.h_bar_2 * c.p_bar_1 + c.h_bar_3 * c.p_bar_2) / c.det_bar
    hi2 = (c.p_bar_2 * c.h_bar_1 + c.p_bar_3 * c.h_bar_2) / c.det_bar
    lo1 = (c.h_lo_2 * c.p_lo_1 + c.h_lo_3 * c.p_lo_2) / c.det_lo
    lo2 = (c.p_lo_2 * c.h_lo_1 + c.p_lo_3 * c.h_lo_2) / c.det_lo
    rect = Rectangle(lo1, hi1, lo2, hi2, branch)
    return ClosedFormResult(rect, coeffs, tuple(rect.violations(spec)))


# ---------------------------------------------------------------------------
# special cases


def chi_zero_rectangle(spec: ModelSpec) -> Rectangle:
    """Quotient formulas for the rectangle without chemotaxis."""
    T = _Terms(spec)
    lo1 = (T.a0i * T.b2i - T.a2s * T.b0s) / (T.a1s * T.b2i - T.a2s * T.b1i)
    hi1 = (T.a0s * T.b2s - T.a2i * T.b0i) / (T.a1i * T.b2s - T.a2i * T.b1s)
    lo2 = (T.a1i * T.b0i - T.a0s * T.b1s) / (T.a1i * T.b2s - T.a2i * T.b1s)
    hi2 = (T.a1s * T.b0s - T.a0i * T.b1i) / (T.a1s * T.b2i - T.a2s * T.b1i)
    return Rectangle(lo1, hi1, lo2, hi2, "R")


def constant_equilibrium(spec: ModelSpec) -> tuple[float, float]:
    """Coexistence equilibrium for constant coefficients."""
    if not spec.is_constant:
        raise NotConstantCoefficients("all six coefficients must be constant")
    a0, a1, a2 = spec.a0.mean, spec.a1.mean, spec.a2.mean
    b0, b1, b2 = spec.b0.mean, spec.b1.mean, spec.b2.mean
    den = b2 * a1 - b1 * a2
    return (a0 * b2 - a2 * b0) / den, (b0 * a1 - b1 * a0) / den


def constant_coefficient_check(spec: ModelSpec) -> bool:
    """a2/b2 < a0/b0 < a1/b1 and (a1 - 2k chi1/d3)(b2 - 2l chi2/d3) > a2 b1."""
    if not spec.is_constant:
        raise NotConstantCoefficients("all six coefficients must be constant")
    c = spec.constants
    a0, a1, a2 = spec.a0.inf, spec.a1.inf, spec.a2.inf
    b0, b1, b2 = spec.b0.inf, spec.b1.inf, spec.b2.inf
    chain = a2 / b2 < a0 / b0 < a1 / b1
    product = (a1 - 2.0 * c.kappa1) * (b2 - 2.0 * c.ell2) > a2 * b1
    return bool(chain and product)
