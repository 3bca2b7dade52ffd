"""Fixed-step RK4 for the comparison envelope and the spatially homogeneous
competition system, plus the pullback construction of the entire solution.

Coefficient values are tabulated once on the step nodes and midpoints, so
the inner loop is plain float arithmetic and fully deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import HypothesisNotMet, InvalidSpec, NonPositiveComponent, PullbackNotConverged, StepUnstable
from .params import ModelSpec, check_hypotheses

UNDERSHOOT = 1e-12
OVERFLOW = 1e12
# allowed per-sample rise of the Lyapunov ratio: its float resolution once the envelope gap
# is a few ulps of the state
LYAPUNOV_SLACK = 4.0 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class OdeState4:
    u_hi: float
    u_lo: float
    v_hi: float
    v_lo: float

    def __post_init__(self):
        if min(self.u_hi, self.u_lo, self.v_hi, self.v_lo) < 0:
            raise ValueError("comparison state must be nonnegative")


@dataclass(frozen=True)
class OdeState2:
    u: float
    v: float

    def __post_init__(self):
        if min(self.u, self.v) < 0:
            raise ValueError("state must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (n_saved, n_components)
    columns: tuple

    def __getitem__(self, name: str) -> np.ndarray:
        return self.y[:, self.columns.index(name)]

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    def ordering_violation(self) -> float:
        """max(u_lo - u_hi, v_lo - v_hi) over saved points (<= 0 when ordered)."""
        return float(np.max(np.maximum(self["u_lo"] - self["u_hi"], self["v_lo"] - self["v_hi"])))


def _time_nodes(t0: float, t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end >= t0:
        raise ValueError("t_end must not precede t0")
    n = max(1, math.ceil((t_end - t0) / dt - 1e-9)) if t_end > t0 else 0
    if n == 0:
        return np.array([t0])
    nodes = t0 + (t_end - t0) * np.arange(n + 1) / n
    nodes[-1] = t_end
    return nodes


def _tabulate(values_at, nodes: np.ndarray):
    """Values at nodes and at the midpoints, interleaved: [t0, t0+h/2, t1, ...]."""
    fine = np.empty(2 * len(nodes) - 1)
    fine[0::2] = nodes
    fine[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
    return np.broadcast_to(np.asarray(values_at(fine), dtype=float), fine.shape).tolist()


def _check(y: list, t: float) -> list:
    for i, value in enumerate(y):
        if not value >= 0.0:
            if value > -UNDERSHOOT:
                y[i] = 0.0
            else:
                raise StepUnstable(f"component {i} fell to {value!r} at t={t:.6g}")
        elif value > OVERFLOW or not math.isfinite(value):
            raise StepUnstable(f"component {i} overflowed ({value!r}) at t={t:.6g}")
    return y


def _rk4(rhs, y0: list, nodes: np.ndarray, save_every: int = 1, save_mask=None):
    """Classical RK4 over ``nodes``; ``rhs(j, y)`` sees half-index j (node i is j = 2i)."""
    y = list(y0)
    n = len(nodes) - 1
    saved_t = [float(nodes[0])]
    saved_y = [tuple(y)]
    dim = len(y)
    for i in range(n):
        h = float(nodes[i + 1] - nodes[i])
        j = 2 * i
        k1 = rhs(j, y)
        k2 = rhs(j + 1, [y[m] + 0.5 * h * k1[m] for m in range(dim)])
        k3 = rhs(j + 1, [y[m] + 0.5 * h * k2[m] for m in range(dim)])
        k4 = rhs(j + 2, [y[m] + h * k3[m] for m in range(dim)])
        y = [y[m] + h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]) for m in range(dim)]
        y = _check(y, float(nodes[i + 1]))
        keep = save_mask[i + 1] if save_mask is not None else ((i + 1) % save_every == 0 or i + 1 == n)
        if keep:
            saved_t.append(float(nodes[i + 1]))
            saved_y.append(tuple(y))
    return np.array(saved_t), np.array(saved_y, dtype=float)


def _comparison_rhs(spec: ModelSpec, nodes: np.ndarray):
    c = spec.constants
    tab = {}
    for name, fld in spec.fields().items():
        tab[name + "i"] = _tabulate(fld.inf_at, nodes)
        tab[name + "s"] = _tabulate(fld.sup_at, nodes)
    a0i, a0s, a1i, a1s, a2i, a2s = (tab[k] for k in ("a0i", "a0s", "a1i", "a1s", "a2i", "a2s"))
    b0i, b0s, b1i, b1s, b2i, b2s = (tab[k] for k in ("b0i", "b0s", "b1i", "b1s", "b2i", "b2s"))
    g1 = c.chi1 / c.d3
    g2 = c.chi2 / c.d3
    k, l = c.k, c.l

    def rhs(j, y):
        uh, ul, vh, vl = y
        # chemotactic drift difference, written so it is exactly zero when hi == lo
        spread = k * (uh - ul) + l * (vh - vl)
        return [
            g1 * uh * spread + uh * (a0s[j] - a1i[j] * uh - a2i[j] * vl),
            -g1 * ul * spread + ul * (a0i[j] - a1s[j] * ul - a2s[j] * vh),
            g2 * vh * spread + vh * (b0s[j] - b1i[j] * ul - b2i[j] * vh),
            -g2 * vl * spread + vl * (b0i[j] - b1s[j] * uh - b2s[j] * vl),
        ]

    return rhs


def _lv_rhs(spec: ModelSpec, nodes: np.ndarray):
    tab = {name: _tabulate(fld.inf_at, nodes) for name, fld in spec.fields().items()}
    a0, a1, a2, b0, b1, b2 = (tab[k] for k in ("a0", "a1", "a2", "b0", "b1", "b2"))

    def rhs(j, y):
        u, v = y
        return [u * (a0[j] - a1[j] * u - a2[j] * v), v * (b0[j] - b1[j] * u - b2[j] * v)]

    return rhs


def solve_comparison4(spec: ModelSpec, init: OdeState4, t0: float, t_end: float, dt: float = 1e-3,
                      save_every: int = 1) -> Trajectory:
    """Integrate the four-component comparison envelope (u_hi, u_lo, v_hi, v_lo)."""
    if init.u_lo > init.u_hi or init.v_lo > init.v_hi:
        raise ValueError("initial envelope must be ordered (lo <= hi)")
    nodes = _time_nodes(t0, t_end, dt)
    t, y = _rk4(_comparison_rhs(spec, nodes), [init.u_hi, init.u_lo, init.v_hi, init.v_lo],
                nodes, save_every)
    return Trajectory(t, y, ("u_hi", "u_lo", "v_hi", "v_lo"))


def _require_homogeneous(spec: ModelSpec):
    if not spec.is_space_independent:
        raise InvalidSpec("the homogeneous competition ODE needs space-independent coefficients")


def solve_lv(spec: ModelSpec, init: OdeState2, t0: float, t_end: float, dt: float = 1e-3,
             save_every: int = 1) -> Trajectory:
    """Integrate u' = u(a0 - a1 u - a2 v), v' = v(b0 - b1 u - b2 v)."""
    _require_homogeneous(spec)
    nodes = _time_nodes(t0, t_end, dt)
    t, y = _rk4(_lv_rhs(spec, nodes), [init.u, init.v], nodes, save_every)
    return Trajectory(t, y, ("u", "v"))


@dataclass(frozen=True)
class PullbackResult:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    deviation: float
    passed: bool
    t0: float


def pullback_entire_solution(spec: ModelSpec, t_back: float, t_grid: Sequence[float], tol: float = 1e-8,
                             dt: float = 1e-3,
                             inits: tuple = ((0.1, 0.1), (10.0, 10.0))) -> PullbackResult:
    """Approximate the positive entire solution on ``t_grid`` by integrating
    two distinct positive initial states from min(t_grid) - t_back.

    Raises PullbackNotConverged when the two runs still differ by ``tol`` or
    more on the grid.
    """
    _require_homogeneous(spec)
    if not check_hypotheses(spec).cond_1_5:
        raise HypothesisNotMet("the pullback construction needs the positivity condition on a0, b0")
    if not t_back > 0 or not tol > 0:
        raise ValueError("t_back and tol must be positive")
    grid = np.unique(np.asarray(t_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("t_grid is empty")
    t0 = float(grid[0] - t_back)

    # step nodes hitting every grid time exactly
    pieces = [_time_nodes(t0, float(grid[0]), dt)]
    for a, b in zip(grid[:-1], grid[1:]):
        pieces.append(_time_nodes(float(a), float(b), dt)[1:])
    nodes = np.concatenate(pieces)
    mask = np.isin(nodes, grid)
    rhs = _lv_rhs(spec, nodes)
    runs = []
    for u0, v0 in inits:
        if not (u0 > 0 and v0 > 0):
            raise ValueError("pullback initial states must be positive")
        t, y = _rk4(rhs, [float(u0), float(v0)], nodes, save_mask=mask)
        runs.append(y[1:] if not mask[0] else y)
    deviation = float(np.max(np.abs(runs[0] - runs[1])))
    c = spec.constants
    u, v = runs[0][:, 0], runs[0][:, 1]
    w = (c.k * u + c.l * v) / c.lam
    result = PullbackResult(grid, u, v, w, deviation, deviation < tol, t0)
    if not result.passed:
        raise PullbackNotConverged(
            f"pullback runs differ by {deviation:.3e} >= {tol:g}; increase t_back", deviation
        )
    return result


def lyapunov_ratio(traj: Trajectory) -> np.ndarray:
    """L(t) = ln(u_hi/u_lo) + ln(v_hi/v_lo) along a comparison trajectory."""
    cols = [traj[name] for name in ("u_hi", "u_lo", "v_hi", "v_lo")]
    if any(np.any(col <= 0.0) for col in cols):
        raise NonPositiveComponent("Lyapunov ratio needs strictly positive components")
    uh, ul, vh, vl = cols
    # log1p of the relative gap keeps full relative accuracy as the envelope collapses
    return np.log1p((uh - ul) / ul) + np.log1p((vh - vl) / vl)
