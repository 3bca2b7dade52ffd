"""Command-line entry point.

Exit codes: 0 when the subcommand's verdict is positive, 2 when it is
negative, 1 on errors (bad config, I/O, numerical failure).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CoexistError
from .ode import OdeState4, solve_comparison4
from .params import check_hypotheses
from .pde import envelope_check, simulate
from .scenario import (
    _jsonable,
    _stable_rectangle,
    compute_rectangles,
    export,
    parse_config,
    run_certify,
    write_run_csv,
)

OK, NEGATIVE, ERROR = 0, 2, 1


def _emit(doc) -> None:
    print(json.dumps(_jsonable(doc), indent=2, allow_nan=False))


def cmd_check(args) -> int:
    cfg = parse_config(args.config)
    rep = check_hypotheses(cfg.spec)
    _emit({**rep.verdicts(), "A_bar_1": rep.A_bar_1, "A_bar_2": rep.A_bar_2,
           "B_bar_1": rep.B_bar_1, "B_bar_2": rep.B_bar_2, "margins": rep.margins})
    return OK if (rep.h1 or rep.h2) else NEGATIVE


def cmd_rectangle(args) -> int:
    cfg = parse_config(args.config)
    rects = compute_rectangles(cfg)
    for entry in rects.values():
        entry.pop("stability", None)
    _emit(rects)
    return OK if any(e.get("rectangle") for e in rects.values()) else NEGATIVE


def cmd_stability(args) -> int:
    cfg = parse_config(args.config)
    rects = compute_rectangles(cfg)
    h7 = check_hypotheses(cfg.spec).h7
    _emit({branch: {"rectangle": e.get("rectangle"), "stability": e.get("stability"),
                    "skipped": e.get("skipped")} for branch, e in rects.items()} | {"h7": h7})
    rect, _ = _stable_rectangle(rects)
    return OK if (rect is not None or h7) else NEGATIVE


def cmd_ode(args) -> int:
    cfg = parse_config(args.config)
    rect, _ = _stable_rectangle(compute_rectangles(cfg))
    out, positive = {}, True
    for run in cfg.runs:
        init_u, init_v = cfg.run_inits(run)
        u0, v0 = init_u.sample(cfg.grid), init_v.sample(cfg.grid)
        traj = solve_comparison4(cfg.spec, OdeState4(u0.max(), u0.min(), v0.max(), v0.min()),
                                 0.0, cfg.t_end, cfg.dt, save_every=cfg.save_every)
        final = dict(zip(traj.columns, traj.final.tolist()))
        entry = {"final": final, "ordering_violation": traj.ordering_violation()}
        ok = entry["ordering_violation"] <= 0.0
        if rect is not None:
            eps = cfg.tolerances.eps
            inside = (final["u_lo"] >= rect.lo1 - eps and final["u_hi"] <= rect.hi1 + eps
                      and final["v_lo"] >= rect.lo2 - eps and final["v_hi"] <= rect.hi2 + eps)
            entry["ends_in_rectangle"] = inside
            ok = ok and inside
        out[run.name] = entry
        positive = positive and ok
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            with open(Path(args.out) / f"{run.name}_ode.csv", "w", encoding="utf-8") as fh:
                fh.write("t," + ",".join(traj.columns) + "\n")
                for t, row in zip(traj.t, traj.y):
                    fh.write(",".join(format(float(x), ".17g") for x in (t, *row)) + "\n")
    _emit(out)
    return OK if positive else NEGATIVE


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    runs = {r.name: r for r in cfg.runs}
    if args.run not in runs:
        raise CoexistError(f"no run named {args.run!r}; available: {sorted(runs)}")
    init_u, init_v = cfg.run_inits(runs[args.run])
    diag, final = simulate(cfg.spec, cfg.grid, init_u, init_v, cfg.t_end, cfg.dt, cfg.save_every,
                           bound_eps=cfg.tolerances.eps)
    doc = {"run": args.run, "t_end": final.t, "min_u": float(final.u.min()), "max_u": float(final.u.max()),
           "min_v": float(final.v.min()), "max_v": float(final.v.max()),
           "bound_entry_time": diag.bound_entry_time, "tol_num": diag.tol_num}
    positive = True
    rect, _ = _stable_rectangle(compute_rectangles(cfg))
    if rect is not None:
        env = envelope_check(diag, rect, cfg.tolerances.eps)
        doc["envelope"] = {"passed": env.passed, "entry_time": env.entry_time}
        positive = env.passed
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_run_csv(diag, Path(args.out) / f"{args.run}.csv")
    _emit(doc)
    return OK if positive else NEGATIVE


def cmd_certify(args) -> int:
    cfg = parse_config(args.config)
    report = run_certify(cfg)
    export(report, args.out)
    print(f"status: {report.status}")
    for reason in report.reasons:
        print(f"  - {reason}")
    return OK if report.status == "certified" else NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coexist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="scenario JSON file")
        p.set_defaults(func=fn)
        return p

    add("check", cmd_check, "evaluate the hypotheses only")
    add("rectangle", cmd_rectangle, "attracting rectangles by iteration and closed form")
    add("stability", cmd_stability, "averaged stability condition per branch")
    add("ode", cmd_ode, "comparison envelope ODE per run").add_argument("--out", help="write CSV trajectories here")
    p = add("simulate", cmd_simulate, "run one PDE simulation")
    p.add_argument("--run", required=True, help="run name from the config")
    p.add_argument("--out", help="write the diagnostics CSV here")
    add("certify", cmd_certify, "full pipeline with export").add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CoexistError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
