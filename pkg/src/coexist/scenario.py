"""Scenario configuration, the end-to-end certification pipeline and export.

Config files are strict JSON; see ``README.md`` for the schema. Every key
outside the schema is rejected, and every validation problem is reported
at once.
"""
from __future__ import annotations

import csv
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import CoexistError, ConfigError, InvalidSpec, ParseError, ValidationError
from .ode import LYAPUNOV_SLACK, OdeState4, lyapunov_ratio, pullback_entire_solution, solve_comparison4
from .params import COEFFICIENT_NAMES, CoefficientField, ModelConstants, ModelSpec, check_hypotheses
from .pde import (
    Grid1D,
    InitProfile,
    RunDiagnostics,
    energy_between,
    envelope_check,
    invariance_check,
    simulate,
)
from .rectangle import Rectangle, closed_form_rectangle, iterate_rectangle
from .stability import check_average_condition

CONSTANT_KEYS = ("d1", "d2", "d3", "chi1", "chi2", "k", "l", "lambda")
COEFFICIENT_KEYS = ("mean", "time_amp", "time_freq", "time_phase", "space_amp", "space_mode", "inf", "sup")
INIT_KEYS = ("base", "amp", "mode")
RUN_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class Tolerances:
    tol: float = 1e-12  # rectangle iteration
    det_tol: float = 1e-10  # closed-form singularity test
    agree: float = 1e-9  # iteration vs closed form, componentwise
    eps: float = 0.01  # envelope entry
    homog_tol: float = 1e-4  # spatial max - min at the final time
    energy_ratio: float = 1e-8  # E(t_end) / E(0)
    pullback_tol: float = 1e-8


@dataclass(frozen=True)
class RunConfig:
    name: str
    initial_u: Optional[InitProfile] = None
    initial_v: Optional[InitProfile] = None
    pair_with: Optional[str] = None


@dataclass(frozen=True)
class ScenarioConfig:
    spec: ModelSpec
    grid: Grid1D
    dt: float
    t_end: float
    save_every: int
    initial_u: InitProfile
    initial_v: InitProfile
    runs: tuple = ()
    tolerances: Tolerances = Tolerances()

    def run_inits(self, run: RunConfig) -> tuple[InitProfile, InitProfile]:
        return run.initial_u or self.initial_u, run.initial_v or self.initial_v

    def pairs(self) -> list[tuple[str, str]]:
        return [(r.name, r.pair_with) for r in self.runs if r.pair_with is not None]


# ---------------------------------------------------------------------------
# parsing


class _Collector:
    def __init__(self):
        self.problems: list[str] = []

    def add(self, message: str):
        self.problems.append(message)

    def obj(self, value, path: str, required: tuple, optional: tuple = ()) -> dict:
        if not isinstance(value, dict):
            self.add(f"{path}: expected an object")
            return {}
        for key in value:
            if key not in required and key not in optional:
                self.add(f"{path}.{key}: unknown key")
        for key in required:
            if key not in value:
                self.add(f"{path}.{key}: missing required key")
        return value

    def number(self, obj: dict, key: str, path: str, *, positive=False, nonneg=False,
               integer=False, default=None):
        if key not in obj:
            return default
        value = obj[key]
        where = f"{path}.{key}"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(f"{where}: expected a number, got {value!r}")
            return default
        value = float(value)
        if not math.isfinite(value):
            self.add(f"{where}: must be finite")
            return default
        if integer and not value.is_integer():
            self.add(f"{where}: expected an integer, got {value!r}")
            return default
        if positive and not value > 0:
            self.add(f"{where}: must be positive, got {value!r}")
        elif nonneg and value < 0:
            self.add(f"{where}: must be nonnegative, got {value!r}")
        return int(value) if integer else value


def _parse_init(c: _Collector, value, path: str) -> Optional[InitProfile]:
    obj = c.obj(value, path, ("base",), ("amp", "mode"))
    base = c.number(obj, "base", path, nonneg=True)
    amp = c.number(obj, "amp", path, default=0.0)
    mode = c.number(obj, "mode", path, nonneg=True, integer=True, default=0)
    if base is None or amp is None or mode is None:
        return None
    return InitProfile(base, amp, mode)


def _parse_coefficient(c: _Collector, value, path: str) -> Optional[CoefficientField]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = {"mean": value}
    obj = c.obj(value, path, ("mean",), COEFFICIENT_KEYS[1:])
    if not obj:
        return None
    kwargs = {}
    for key in COEFFICIENT_KEYS:
        if key == "space_mode":
            v = c.number(obj, key, path, nonneg=True, integer=True)
        elif key in ("inf", "sup"):
            v = c.number(obj, key, path, positive=True)
        else:
            v = c.number(obj, key, path)
        if v is not None:
            kwargs[key] = v
    if "mean" not in kwargs:
        return None
    try:
        return CoefficientField(**kwargs)
    except InvalidSpec as exc:
        c.add(f"{path}: {exc}")
        return None


def config_from_dict(data: Any) -> ScenarioConfig:
    """Validate a decoded JSON document; raises ValidationError listing every problem."""
    c = _Collector()
    top = c.obj(data, "$", ("model", "grid", "time", "initial_u", "initial_v", "runs"), ("tolerances",))

    model = c.obj(top.get("model", {}), "model", ("constants", "coefficients"))
    consts = c.obj(model.get("constants", {}), "model.constants", CONSTANT_KEYS)
    const_values = {}
    for key in CONSTANT_KEYS:
        strict = key in ("d1", "d2", "d3", "lambda")
        const_values[key] = c.number(consts, key, "model.constants", positive=strict, nonneg=not strict)
    coeffs = c.obj(model.get("coefficients", {}), "model.coefficients", COEFFICIENT_NAMES)
    fields = {name: _parse_coefficient(c, coeffs[name], f"model.coefficients.{name}")
              for name in COEFFICIENT_NAMES if name in coeffs}

    grid_obj = c.obj(top.get("grid", {}), "grid", ("length", "n_cells"))
    length = c.number(grid_obj, "length", "grid", positive=True)
    n_cells = c.number(grid_obj, "n_cells", "grid", integer=True)
    if n_cells is not None and n_cells < 4:
        c.add(f"grid.n_cells: must be at least 4, got {n_cells}")

    time_obj = c.obj(top.get("time", {}), "time", ("dt", "t_end"), ("save_every",))
    dt = c.number(time_obj, "dt", "time", positive=True)
    t_end = c.number(time_obj, "t_end", "time", positive=True)
    save_every = c.number(time_obj, "save_every", "time", positive=True, integer=True, default=10)

    init_u = _parse_init(c, top.get("initial_u", {}), "initial_u") if "initial_u" in top else None
    init_v = _parse_init(c, top.get("initial_v", {}), "initial_v") if "initial_v" in top else None

    runs = []
    raw_runs = top.get("runs", [])
    if not isinstance(raw_runs, list):
        c.add("runs: expected a list")
        raw_runs = []
    names = []
    for i, raw in enumerate(raw_runs):
        path = f"runs[{i}]"
        obj = c.obj(raw, path, ("name",), ("initial_u", "initial_v", "pair_with"))
        name = obj.get("name")
        if not isinstance(name, str) or not RUN_NAME.match(name):
            c.add(f"{path}.name: expected a file-safe name, got {name!r}")
            continue
        if name in names:
            c.add(f"{path}.name: duplicate run name {name!r}")
        names.append(name)
        pair = obj.get("pair_with")
        if pair is not None and not isinstance(pair, str):
            c.add(f"{path}.pair_with: expected a run name")
            pair = None
        runs.append(RunConfig(
            name,
            _parse_init(c, obj["initial_u"], f"{path}.initial_u") if "initial_u" in obj else None,
            _parse_init(c, obj["initial_v"], f"{path}.initial_v") if "initial_v" in obj else None,
            pair,
        ))
    for run in runs:
        if run.pair_with is not None and (run.pair_with not in names or run.pair_with == run.name):
            c.add(f"runs.{run.name}.pair_with: {run.pair_with!r} is not another run")

    tol_values = {}
    if "tolerances" in top:
        names_t = tuple(Tolerances.__dataclass_fields__)
        tol_obj = c.obj(top["tolerances"], "tolerances", (), names_t)
        for key in names_t:
            value = c.number(tol_obj, key, "tolerances", positive=True)
            if value is not None:
                tol_values[key] = value

    spec = None
    if not c.problems:
        try:
            constants = ModelConstants(*(const_values[k] for k in CONSTANT_KEYS))
            spec = ModelSpec(constants, *(fields[n] for n in COEFFICIENT_NAMES), length=length)
        except InvalidSpec as exc:
            c.add(f"model: {exc}")
    if c.problems:
        raise ValidationError("invalid scenario config", c.problems)
    return ScenarioConfig(spec, Grid1D(length, n_cells), dt, t_end, save_every, init_u, init_v,
                          tuple(runs), Tolerances(**tol_values))


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")  # FileNotFoundError propagates
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Normalized document; parsing it reproduces an identical config."""
    c = cfg.spec.constants
    constants = {"d1": c.d1, "d2": c.d2, "d3": c.d3, "chi1": c.chi1, "chi2": c.chi2,
                 "k": c.k, "l": c.l, "lambda": c.lam}
    coefficients = {name: asdict(fld) for name, fld in cfg.spec.fields().items()}

    def init(p: Optional[InitProfile]):
        return None if p is None else {"base": p.base, "amp": p.amp, "mode": p.mode}

    runs = []
    for r in cfg.runs:
        entry = {"name": r.name}
        for key in ("initial_u", "initial_v"):
            if getattr(r, key) is not None:
                entry[key] = init(getattr(r, key))
        if r.pair_with is not None:
            entry["pair_with"] = r.pair_with
        runs.append(entry)
    return {
        "model": {"constants": constants, "coefficients": coefficients},
        "grid": {"length": cfg.grid.length, "n_cells": cfg.grid.n_cells},
        "time": {"dt": cfg.dt, "t_end": cfg.t_end, "save_every": cfg.save_every},
        "initial_u": init(cfg.initial_u),
        "initial_v": init(cfg.initial_v),
        "runs": runs,
        "tolerances": asdict(cfg.tolerances),
    }


# ---------------------------------------------------------------------------
# certification


def _max_workers() -> int:
    raw = os.environ.get("COEXIST_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"COEXIST_THREADS must be an integer, got {raw!r}") from None


def _map(fn, tasks: list):
    """Run tasks in a process pool capped by COEXIST_THREADS; results keep task order."""
    workers = min(_max_workers(), len(tasks))
    if workers <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _run_task(cfg: ScenarioConfig, run: RunConfig):
    init_u, init_v = cfg.run_inits(run)
    try:
        diag, _ = simulate(cfg.spec, cfg.grid, init_u, init_v, cfg.t_end, cfg.dt, cfg.save_every,
                           bound_eps=cfg.tolerances.eps)
        return diag, None
    except CoexistError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _invariance_task(cfg: ScenarioConfig, rect: Rectangle):
    try:
        return invariance_check(cfg.spec, cfg.grid, rect, cfg.dt, cfg.t_end, cfg.save_every), None
    except CoexistError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _rect_dict(rect: Optional[Rectangle]):
    if rect is None:
        return None
    return {"lo1": rect.lo1, "hi1": rect.hi1, "lo2": rect.lo2, "hi2": rect.hi2, "branch": rect.branch}


def _error(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def compute_rectangles(cfg: ScenarioConfig, report=None) -> dict:
    """Both methods on every branch licensed by the hypotheses."""
    report = report or check_hypotheses(cfg.spec)
    tol = cfg.tolerances
    out = {}
    for branch, licensed in (("R", report.h5), ("S", report.h6)):
        if not licensed:
            out[branch] = {"licensed": False,
                           "skipped": f"{'H5' if branch == 'R' else 'H6'} does not hold"}
            continue
        entry = {"licensed": True}
        iterated = closed = None
        try:
            iterated, trace = iterate_rectangle(cfg.spec, branch, tol.tol)
            entry["iteration"] = {"rectangle": _rect_dict(iterated), "iterations": trace.iterations,
                                  "residual": trace.residual, "monotone": trace.is_monotone()}
        except CoexistError as exc:
            entry["iteration"] = {"error": _error(exc)}
        try:
            result = closed_form_rectangle(cfg.spec, tol.det_tol, branch)
            closed = result.rectangle
            entry["closed_form"] = {"rectangle": _rect_dict(closed), "det_bar": result.coefficients.det_bar,
                                    "det_lo": result.coefficients.det_lo,
                                    "violations": list(result.violations)}
            if result.violations:
                closed = None
        except CoexistError as exc:
            entry["closed_form"] = {"error": _error(exc)}
        if iterated is not None and closed is not None:
            entry["agreement"] = max(abs(a - b) for a, b in zip(iterated.as_tuple(), closed.as_tuple()))
            entry["agree"] = entry["agreement"] <= tol.agree
        chosen = iterated or closed
        entry["rectangle"] = _rect_dict(chosen)
        if chosen is not None:
            prof = check_average_condition(cfg.spec, chosen)
            entry["stability"] = {"mu_estimate": prof.mu_estimate, "verdict": prof.verdict,
                                  "slack": prof.slack, "window": prof.window, "exact": prof.exact}
        out[branch] = entry
    return out


def _stable_rectangle(rects: dict) -> tuple[Optional[Rectangle], Optional[float]]:
    for branch in ("R", "S"):
        entry = rects.get(branch, {})
        if entry.get("stability", {}).get("verdict"):
            r = entry["rectangle"]
            return Rectangle(r["lo1"], r["hi1"], r["lo2"], r["hi2"], r["branch"]), entry["stability"]["mu_estimate"]
    return None, None


def _h7_checks(cfg: ScenarioConfig, diags: dict) -> dict:
    """Homogenization, Lyapunov monotonicity and pullback agreement."""
    tol = cfg.tolerances
    out = {"homogenization": {}, "lyapunov": {}}
    for name, diag in diags.items():
        if diag is None:
            continue
        spread_u = diag.u_snapshots[-1].max() - diag.u_snapshots[-1].min()
        spread_v = diag.v_snapshots[-1].max() - diag.v_snapshots[-1].min()
        out["homogenization"][name] = {"spread_u": float(spread_u), "spread_v": float(spread_v),
                                       "passed": bool(max(spread_u, spread_v) < tol.homog_tol)}
    for run in cfg.runs:
        init_u, init_v = cfg.run_inits(run)
        u0, v0 = init_u.sample(cfg.grid), init_v.sample(cfg.grid)
        try:
            traj = solve_comparison4(cfg.spec, OdeState4(u0.max(), u0.min(), v0.max(), v0.min()),
                                     0.0, cfg.t_end, cfg.dt, save_every=cfg.save_every)
            L = lyapunov_ratio(traj)
            rise = float(np.max(np.diff(L))) if L.size > 1 else 0.0
            out["lyapunov"][run.name] = {"L0": float(L[0]), "L_end": float(L[-1]), "max_rise": rise,
                                         "passed": bool(rise <= LYAPUNOV_SLACK)}
        except CoexistError as exc:
            out["lyapunov"][run.name] = {"error": _error(exc), "passed": False}
    try:
        t_grid = np.linspace(0.0, cfg.t_end, 11)
        pb = pullback_entire_solution(cfg.spec, 50.0, t_grid, tol.pullback_tol, cfg.dt)
        out["pullback"] = {"deviation": pb.deviation, "passed": pb.passed, "t0": pb.t0,
                           "u": pb.u.tolist(), "v": pb.v.tolist(), "w": pb.w.tolist(), "t": pb.t.tolist()}
    except CoexistError as exc:
        out["pullback"] = {"error": _error(exc), "passed": False,
                           "deviation": getattr(exc, "deviation", None)}
    return out


@dataclass
class CertificationReport:
    status: str
    reasons: list
    data: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)  # name -> RunDiagnostics
    energies: dict = field(default_factory=dict)  # (a, b) -> EnergyResult

    def to_json(self) -> str:
        doc = {"status": self.status, "reasons": self.reasons, **self.data}
        return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_certify(cfg: ScenarioConfig) -> CertificationReport:
    """hypotheses -> rectangles -> stability -> simulation checks."""
    tol = cfg.tolerances
    hyp = check_hypotheses(cfg.spec)
    data = {
        "config": config_to_dict(cfg),
        "hypotheses": {**hyp.verdicts(), "A_bar_1": hyp.A_bar_1, "A_bar_2": hyp.A_bar_2,
                       "B_bar_1": hyp.B_bar_1, "B_bar_2": hyp.B_bar_2, "margins": hyp.margins},
    }
    checks: list[tuple[str, bool]] = []
    reasons: list[str] = []

    if not (hyp.h1 or hyp.h2):
        reasons.append("H1 and H2 both fail: no global bound, every later stage skipped")
        skipped = "skipped: neither H1 nor H2 holds"
        data.update(rectangles=skipped, simulations=skipped, checks={})
        return CertificationReport("failed", reasons, data)

    rects = compute_rectangles(cfg, hyp)
    data["rectangles"] = rects
    for branch, entry in rects.items():
        if entry.get("licensed") and "agree" in entry:
            checks.append((f"rectangle_{branch}_methods_agree", entry["agree"]))
        if entry.get("licensed") and entry.get("rectangle") is None:
            checks.append((f"rectangle_{branch}_found", False))
    rect, mu = _stable_rectangle(rects)
    h7 = bool(hyp.h7)
    if rect is None and not h7:
        reasons.append("no licensed branch satisfies the averaged stability condition and H7 does not hold")

    names = [r.name for r in cfg.runs]
    results = _map(_run_task, [(cfg, r) for r in cfg.runs])
    diags = {name: diag for name, (diag, _) in zip(names, results)}
    sims = {}
    for name, (diag, err) in zip(names, results):
        if err is not None:
            sims[name] = {"error": err}
            checks.append((f"run_{name}_completed", False))
            continue
        entry = {"t_end": float(diag.t[-1]), "min_u": float(diag["min_u"][-1]), "max_u": float(diag["max_u"][-1]),
                 "min_v": float(diag["min_v"][-1]), "max_v": float(diag["max_v"][-1]),
                 "bound_entry_time": diag.bound_entry_time, "tol_num": diag.tol_num}
        if rect is not None:
            env = envelope_check(diag, rect, tol.eps)
            entry["envelope"] = {"passed": env.passed, "entry_time": env.entry_time, "eps": env.eps}
            checks.append((f"envelope_{name}", env.passed))
        sims[name] = entry
    data["simulations"] = sims

    if rect is not None:
        inv, err = _invariance_task(cfg, rect)
        if err is not None:
            data["invariance"] = {"error": err}
            checks.append(("invariance", False))
        else:
            data["invariance"] = {"passed": inv.passed, "tol_num": inv.tol_num, "excursions": inv.excursions}
            checks.append(("invariance", inv.passed))

    energies = {}
    data["energy"] = {}
    for a, b in cfg.pairs():
        key = f"{a}_{b}"
        if diags.get(a) is None or diags.get(b) is None:
            data["energy"][key] = {"error": "a paired run failed"}
            checks.append((f"energy_{key}", False))
            continue
        res = energy_between(diags[a], diags[b])
        energies[(a, b)] = res
        e0, e_end = float(res.energy[0]), float(res.energy[-1])
        entry = {"E0": e0, "E_end": e_end, "ratio_passed": bool(e_end < tol.energy_ratio * e0),
                 "rate": res.rate, "fit_points": res.fit_points}
        passed = entry["ratio_passed"]
        if mu is not None and res.rate is not None:
            eps0 = max(0.0, res.rate / 2.0 - mu)
            entry.update(mu=mu, eps0=eps0, rate_passed=bool(eps0 < abs(mu)))
            passed = passed and entry["rate_passed"]
        data["energy"][key] = entry
        checks.append((f"energy_{key}", bool(passed)))

    if h7:
        h7data = _h7_checks(cfg, diags)
        data["h7"] = h7data
        for name, entry in h7data["homogenization"].items():
            checks.append((f"homogenization_{name}", entry["passed"]))
        for name, entry in h7data["lyapunov"].items():
            checks.append((f"lyapunov_{name}", entry["passed"]))
        checks.append(("pullback", h7data["pullback"]["passed"]))

    data["checks"] = {name: bool(ok) for name, ok in checks}
    failed = [name for name, ok in checks if not ok]
    reasons.extend(f"check failed: {name}" for name in failed)
    stable_route = rect is not None or h7
    # past the global-existence gate the outcome is at worst partial
    status = "certified" if stable_route and not failed else "partial"
    return CertificationReport(status, reasons, data, diags, energies)


# ---------------------------------------------------------------------------
# export

CSV_HEADER = ("t", "min_u", "max_u", "min_v", "max_v", "min_w", "max_w", "mass_u", "mass_v")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_run_csv(diag: RunDiagnostics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in diag.rows():
            writer.writerow([_fmt(x) for x in row])


def export(report: CertificationReport, out_dir) -> list[Path]:
    """report.json, one CSV per run and energy_<a>_<b>.csv per pair."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    written[0].write_text(report.to_json(), encoding="utf-8")
    for name in sorted(report.runs):
        diag = report.runs[name]
        if diag is None:
            continue
        path = out / f"{name}.csv"
        write_run_csv(diag, path)
        written.append(path)
    for (a, b), res in sorted(report.energies.items()):
        path = out / f"energy_{a}_{b}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t", "energy"))
            for t, e in zip(res.t, res.energy):
                writer.writerow((_fmt(t), _fmt(e)))
        written.append(path)
    return written
