"""1-D finite-volume simulation of the parabolic-parabolic-elliptic system
on [0, L] with no-flux boundaries.

Per step: elliptic solve for w, explicit upwind chemotaxis flux and
reaction, then backward-Euler diffusion. Cells are centred at (j + 1/2) h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs

from .errors import CflViolated, GridMismatch, SingularSystem, StepUnstable
from .params import ModelConstants, ModelSpec, check_hypotheses
from .rectangle import Rectangle

UNDERSHOOT = 1e-12
OVERFLOW = 1e12


@dataclass(frozen=True)
class Grid1D:
    length: float
    n_cells: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError("n_cells must be an integer >= 4")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    def laplacian(self, w: np.ndarray) -> np.ndarray:
        """Second difference with mirrored ghost cells."""
        padded = np.concatenate(([w[0]], w, [w[-1]]))
        return (padded[2:] - 2.0 * w + padded[:-2]) / self.h ** 2

    def mass(self, u: np.ndarray) -> float:
        return float(self.h * np.sum(u))


@dataclass(frozen=True)
class SimState:
    t: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class InitProfile:
    """max(base + amp * cos(mode * pi * x / L), 0)."""

    base: float
    amp: float = 0.0
    mode: int = 0

    def sample(self, grid: Grid1D) -> np.ndarray:
        values = self.base + self.amp * np.cos(self.mode * math.pi * grid.x / grid.length)
        return np.maximum(values, 0.0)


InitLike = Union[InitProfile, float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _sample_init(init: InitLike, grid: Grid1D) -> np.ndarray:
    if isinstance(init, InitProfile):
        values = init.sample(grid)
    elif callable(init):
        values = np.asarray(init(grid.x), dtype=float)
    else:
        values = np.asarray(init, dtype=float)
    values = np.broadcast_to(values, (grid.n_cells,)).astype(float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("initial data must be finite and nonnegative")
    return values


# ---------------------------------------------------------------------------
# linear solves


class _Tridiagonal:
    """LU-factored shift*I - coef*Delta_h with Neumann closure (LAPACK gttrf/gttrs)."""

    def __init__(self, n: int, h: float, shift: float, coef: float):
        off = coef / h ** 2
        diag = np.full(n, shift + 2.0 * off)
        diag[0] = diag[-1] = shift + off
        sub = np.full(n - 1, -off)
        self.factors = dgttrf(sub, diag, sub.copy())
        if self.factors[-1] != 0:
            raise SingularSystem(f"tridiagonal factorization failed (info={self.factors[-1]})")

    def solve(self, b: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv, _ = self.factors
        x, info = dgttrs(dl, d, du, du2, ipiv, b)
        if info != 0:
            raise SingularSystem(f"tridiagonal solve failed (info={info})")
        return x


@lru_cache(maxsize=64)
def _operator(n: int, h: float, shift: float, coef: float) -> _Tridiagonal:
    return _Tridiagonal(n, h, shift, coef)


def solve_elliptic(grid: Grid1D, u: np.ndarray, v: np.ndarray, constants: ModelConstants) -> np.ndarray:
    """Solve (lam I - d3 Delta_h) w = k u + l v."""
    if not constants.lam > 0:
        raise SingularSystem("the signal equation needs lam > 0")
    rhs = constants.k * np.asarray(u, dtype=float) + constants.l * np.asarray(v, dtype=float)
    return _operator(grid.n_cells, grid.h, constants.lam, constants.d3).solve(rhs)


def elliptic_residual(grid: Grid1D, u, v, w, constants: ModelConstants) -> float:
    c = constants
    r = c.d3 * grid.laplacian(w) + c.k * np.asarray(u) + c.l * np.asarray(v) - c.lam * w
    return float(np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# stepping


class _Stepper:
    """Caches spatial profiles and matrices for a fixed (spec, grid, dt)."""

    def __init__(self, spec: ModelSpec, grid: Grid1D, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.spec, self.grid, self.dt = spec, grid, dt
        c = spec.constants
        self.c = c
        x = grid.x
        self.fields = []
        for name, fld in spec.fields().items():
            base = fld.mean + fld.space_amp * np.cos(fld.space_mode * math.pi * x / spec.length)
            self.fields.append((fld, base))
        self.diff_u = _operator(grid.n_cells, grid.h, 1.0, dt * c.d1)
        self.diff_v = _operator(grid.n_cells, grid.h, 1.0, dt * c.d2)
        self.chi_max = max(c.chi1, c.chi2)

    def coefficients(self, t: float):
        return [base + float(fld.time_term(t)) if fld.time_amp else base for fld, base in self.fields]

    def _drift(self, q: np.ndarray, grad: np.ndarray, chi: float) -> np.ndarray:
        """-(J_{j+1/2} - J_{j-1/2}) / h with J = chi q_upwind dw/dx, zero at the walls."""
        if chi == 0.0:
            return np.zeros_like(q)
        q_face = np.where(grad > 0.0, q[:-1], q[1:])
        flux = np.concatenate(([0.0], chi * q_face * grad, [0.0]))
        return -(flux[1:] - flux[:-1]) / self.grid.h

    def advance(self, t: float, u: np.ndarray, v: np.ndarray, w: np.ndarray):
        h, dt, c = self.grid.h, self.dt, self.c
        grad = np.diff(w) / h
        if self.chi_max > 0.0 and grad.size:
            courant = dt * self.chi_max * float(np.max(np.abs(grad))) / h
            if courant > 0.5:
                raise CflViolated(f"advective Courant number {courant:.3g} > 0.5 at t={t:.6g}")
        a0, a1, a2, b0, b1, b2 = self.coefficients(t)
        u_star = u + dt * (self._drift(u, grad, c.chi1) + u * (a0 - a1 * u - a2 * v))
        v_star = v + dt * (self._drift(v, grad, c.chi2) + v * (b0 - b1 * u - b2 * v))
        if self.diff_u is self.diff_v:
            both = self.diff_u.solve(np.column_stack((u_star, v_star)))
            u_new, v_new = both[:, 0], both[:, 1]
        else:
            u_new, v_new = self.diff_u.solve(u_star), self.diff_v.solve(v_star)
        return _clamp(u_new, "u", t + dt), _clamp(v_new, "v", t + dt)


def _clamp(q: np.ndarray, name: str, t: float) -> np.ndarray:
    low = q.min()
    if low < 0.0:
        if low <= -UNDERSHOOT:
            raise StepUnstable(f"{name} fell to {low!r} at t={t:.6g}")
        q = np.maximum(q, 0.0)
    high = q.max()
    if not high <= OVERFLOW:
        raise StepUnstable(f"{name} overflowed ({high!r}) at t={t:.6g}")
    return q


def step(state: SimState, spec: ModelSpec, grid: Grid1D, dt: float) -> SimState:
    """One IMEX step; the returned w matches the returned u, v."""
    stepper = _Stepper(spec, grid, dt)
    w = solve_elliptic(grid, state.u, state.v, spec.constants)
    u, v = stepper.advance(state.t, state.u, state.v, w)
    return SimState(state.t + dt, u, v, solve_elliptic(grid, u, v, spec.constants))


# ---------------------------------------------------------------------------
# runs and diagnostics

_SERIES = ("t", "min_u", "max_u", "min_v", "max_v", "min_w", "max_w", "mass_u", "mass_v")


@dataclass
class RunDiagnostics:
    grid: Grid1D
    dt: float
    series: dict = field(default_factory=lambda: {k: [] for k in _SERIES})
    u_snapshots: list = field(default_factory=list)
    v_snapshots: list = field(default_factory=list)
    bound_entry_time: Optional[float] = None  # max u, v below the ultimate bounds + eps from here on
    bound_eps: float = 0.01

    def record(self, state: SimState, keep_fields: bool = True):
        s, g = self.series, self.grid
        s["t"].append(state.t)
        for name, q in (("u", state.u), ("v", state.v), ("w", state.w)):
            s["min_" + name].append(float(np.min(q)))
            s["max_" + name].append(float(np.max(q)))
        s["mass_u"].append(g.mass(state.u))
        s["mass_v"].append(g.mass(state.v))
        if keep_fields:
            self.u_snapshots.append(state.u.copy())
            self.v_snapshots.append(state.v.copy())

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name])

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    @property
    def tol_num(self) -> float:
        return 10.0 * self.grid.h ** 2 + 10.0 * self.dt

    def rows(self):
        return zip(*(self.series[k] for k in _SERIES))


def _n_steps(t0: float, t_end: float, dt: float) -> tuple[int, float]:
    if not dt > 0 or not t_end >= t0:
        raise ValueError("need dt > 0 and t_end >= t0")
    n = math.ceil((t_end - t0) / dt - 1e-9) if t_end > t0 else 0
    return n, ((t_end - t0) / n if n else dt)


def simulate(spec: ModelSpec, grid: Grid1D, init_u: InitLike, init_v: InitLike, t_end: float,
             dt: float = 1e-3, save_every: int = 1, t0: float = 0.0, keep_fields: bool = True,
             bound_eps: float = 0.01) -> tuple[RunDiagnostics, SimState]:
    """Integrate from t0 to t_end, recording diagnostics every ``save_every`` steps
    (and always at both ends)."""
    if abs(grid.length - spec.length) > 1e-12 * spec.length:
        raise GridMismatch(f"grid length {grid.length} differs from model length {spec.length}")
    if int(save_every) != save_every or save_every < 1:
        raise ValueError("save_every must be a positive integer")
    n, dt_eff = _n_steps(t0, t_end, dt)
    stepper = _Stepper(spec, grid, dt_eff)
    u = _sample_init(init_u, grid)
    v = _sample_init(init_v, grid)
    w = solve_elliptic(grid, u, v, spec.constants)
    run = RunDiagnostics(grid, dt_eff, bound_eps=bound_eps)
    run.record(SimState(t0, u, v, w), keep_fields)
    for i in range(1, n + 1):
        u, v = stepper.advance(t0 + (i - 1) * dt_eff, u, v, w)
        w = solve_elliptic(grid, u, v, spec.constants)
        if i % save_every == 0 or i == n:
            run.record(SimState(t0 + i * dt_eff, u, v, w), keep_fields)
    final = SimState(t0 + n * dt_eff, u, v, w)

    report = check_hypotheses(spec)
    if report.h1:
        inside = ((run["max_u"] <= report.A_bar_1 + bound_eps)
                  & (run["max_v"] <= report.A_bar_2 + bound_eps))
        run.bound_entry_time = _entry_time(run.t, inside)
    return run, final


def _entry_time(t: np.ndarray, inside: np.ndarray) -> Optional[float]:
    """First saved time from which ``inside`` holds through the end."""
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    return float(t[0] if outside.size == 0 else t[outside[-1] + 1])


@dataclass(frozen=True)
class EnvelopeResult:
    passed: bool
    entry_time: Optional[float]
    eps: float


def envelope_check(run: RunDiagnostics, rect: Rectangle, eps: float = 0.01) -> EnvelopeResult:
    """Entry time into [lo - eps, hi + eps] for both species, held to the end."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    inside = ((run["min_u"] >= rect.lo1 - eps) & (run["max_u"] <= rect.hi1 + eps)
              & (run["min_v"] >= rect.lo2 - eps) & (run["max_v"] <= rect.hi2 + eps))
    entry = _entry_time(run.t, inside)
    return EnvelopeResult(entry is not None, entry, eps)


@dataclass(frozen=True)
class InvarianceResult:
    passed: bool
    tol_num: float
    excursions: dict  # corner label -> largest distance outside the rectangle


def corner_excursion(run: RunDiagnostics, rect: Rectangle) -> float:
    return float(max(
        np.max(rect.lo1 - run["min_u"]), np.max(run["max_u"] - rect.hi1),
        np.max(rect.lo2 - run["min_v"]), np.max(run["max_v"] - rect.hi2),
    ))


def invariance_check(spec: ModelSpec, grid: Grid1D, rect: Rectangle, dt: float, t_end: float,
                     save_every: int = 10, executor=None) -> InvarianceResult:
    """Start constant fields at the four corners and require every saved
    state to stay within tol_num = 10 h^2 + 10 dt of the rectangle."""
    corners = {
        "lo_lo": (rect.lo1, rect.lo2), "lo_hi": (rect.lo1, rect.hi2),
        "hi_lo": (rect.hi1, rect.lo2), "hi_hi": (rect.hi1, rect.hi2),
    }
    args = [(spec, grid, u0, v0, t_end, dt, save_every) for u0, v0 in corners.values()]
    if executor is None:
        runs = [_corner_run(*a) for a in args]
    else:
        runs = list(executor.map(_corner_run, *zip(*args)))
    excursions = {name: corner_excursion(run, rect) for name, run in zip(corners, runs)}
    tol_num = runs[0].tol_num
    return InvarianceResult(all(e <= tol_num for e in excursions.values()), tol_num, excursions)


def _corner_run(spec, grid, u0, v0, t_end, dt, save_every):
    return simulate(spec, grid, float(u0), float(v0), t_end, dt, save_every, keep_fields=False)[0]


@dataclass(frozen=True)
class EnergyResult:
    t: np.ndarray
    energy: np.ndarray
    rate: Optional[float]  # least-squares slope of ln E over the fit window
    fit_start: Optional[float]
    fit_points: int


def energy_between(run_a: RunDiagnostics, run_b: RunDiagnostics, floor: Optional[float] = None) -> EnergyResult:
    """E(t) = h * sum((u_a - u_b)^2 + (v_a - v_b)^2) and its exponential rate.

    The rate is the least-squares slope of ln E over the last half of the
    resolved part of the run, where resolved means E > ``floor``. The default
    floor puts the rms field difference four decades above unit roundoff of
    the largest field value, which excludes the plateau (or exact zero) that
    two converging runs settle into. If E never drops below the floor this is
    simply the last half of the run.
    """
    if run_a.grid != run_b.grid:
        raise GridMismatch("runs use different grids")
    if not np.array_equal(run_a.t, run_b.t):
        raise GridMismatch("runs have different save times")
    if not run_a.u_snapshots or not run_b.u_snapshots:
        raise GridMismatch("runs were recorded without field snapshots")
    ua, ub = np.asarray(run_a.u_snapshots), np.asarray(run_b.u_snapshots)
    va, vb = np.asarray(run_a.v_snapshots), np.asarray(run_b.v_snapshots)
    grid = run_a.grid
    energy = grid.h * np.sum((ua - ub) ** 2 + (va - vb) ** 2, axis=1)
    t = run_a.t
    if floor is None:
        scale = max(float(np.max(np.abs(q))) for q in (ua, ub, va, vb))
        floor = 2.0 * grid.length * (1e4 * np.finfo(float).eps * scale) ** 2
    floor = max(floor, 1e-300)
    resolved = energy > floor
    rate = fit_start = None
    sel = np.zeros_like(resolved)
    if resolved.any():
        t_last = float(t[np.flatnonzero(resolved)[-1]])
        sel = resolved & (t >= t[0] + 0.5 * (t_last - t[0])) & (t <= t_last)
    if np.count_nonzero(sel) >= 3:
        rate = float(np.polyfit(t[sel], np.log(energy[sel]), 1)[0])
        fit_start = float(t[sel][0])
    return EnergyResult(t, energy, rate, fit_start, int(np.count_nonzero(sel)))
