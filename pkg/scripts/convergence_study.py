"""Observed orders of the numerical building blocks.

* elliptic solve: manufactured solution cos(pi x / L), max error vs N
* PDE: saved min/max series under grid refinement at fixed dt
* RK4: terminal error of the competition ODE vs dt
"""
import argparse
import math
import sys

import numpy as np

from coexist import constant_spec
from coexist.ode import OdeState2, solve_lv
from coexist.params import ModelConstants
from coexist.pde import Grid1D, InitProfile, simulate, solve_elliptic


def elliptic_errors(sizes, d3=1.0, lam=1.0, length=1.0):
    c = ModelConstants(d1=1.0, d2=1.0, d3=d3, chi1=0.0, chi2=0.0, k=1.0, l=1.0, lam=lam)
    out = []
    for n in sizes:
        grid = Grid1D(length, n)
        exact = np.cos(math.pi * grid.x / length)
        forcing = (d3 * (math.pi / length) ** 2 + lam) * exact
        out.append(float(np.max(np.abs(solve_elliptic(grid, forcing, np.zeros(n), c) - exact))))
    return out


def pde_series(sizes, chi, t_end, dt):
    spec = constant_spec(3.0, 2.0, 0.5, 3.0, 0.5, 2.0, chi1=chi, chi2=chi)
    out = []
    for n in sizes:
        run, _ = simulate(spec, Grid1D(1.0, n), InitProfile(1.2, 0.5, 1), InitProfile(1.2, -0.4, 2),
                          t_end, dt, save_every=100, keep_fields=False)
        out.append(np.array([run[k] for k in ("min_u", "max_u", "min_v", "max_v")]))
    return out


def rk4_errors(steps, t_end=2.0):
    spec = constant_spec(3.0, 2.0, 0.5, 3.0, 0.5, 2.0)
    init = OdeState2(0.2, 0.9)
    ref = solve_lv(spec, init, 0.0, t_end, min(steps) / 16).final
    return [float(np.max(np.abs(solve_lv(spec, init, 0.0, t_end, dt).final - ref))) for dt in steps]


def orders(errors):
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--chi", type=float, default=0.1)
    parser.add_argument("--t-end", type=float, default=1.0, help="PDE horizon for the refinement study")
    args = parser.parse_args(argv)

    sizes = [16, 32, 64, 128, 256]
    errs = elliptic_errors(sizes)
    print("elliptic (manufactured solution)")
    for n, e, p in zip(sizes, errs, [float("nan")] + orders(errs)):
        print(f"  N={n:4d}  max error {e:.3e}  order {p:.3f}")

    sizes = [32, 64, 128, 256]
    series = pde_series(sizes, args.chi, args.t_end, 1e-3)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(series[:-1], series[1:])]
    print(f"PDE min/max series, chi={args.chi}, t_end={args.t_end}, dt=1e-3")
    for (n1, n2), d, p in zip(zip(sizes, sizes[1:]), diffs, [float("nan")] + orders(diffs)):
        print(f"  N={n1:4d}->{n2:4d}  max change {d:.3e}  order {p:.3f}")

    steps = [0.08, 0.04, 0.02, 0.01]
    errs = rk4_errors(steps)
    print("RK4 (competition ODE, t=2)")
    for dt, e, p in zip(steps, errs, [float("nan")] + orders(errs)):
        print(f"  dt={dt:<6g}  error {e:.3e}  order {p:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
