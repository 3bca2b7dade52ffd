"""Sweep the chemotactic sensitivity on the running example and tabulate
hypotheses, the R-branch rectangle and the averaged stability estimate.

Example:
    python3 scripts/chemotaxis_sweep.py --chi-max 1.0 --steps 21 --csv sweep.csv
"""
import argparse
import csv
import sys

import numpy as np

from coexist import check_hypotheses, closed_form_rectangle, constant_spec, iterate_rectangle
from coexist.errors import CoexistError
from coexist.stability import check_average_condition

COLUMNS = ("chi", "h1", "h5", "lo1", "hi1", "lo2", "hi2", "iter_gap", "iterations", "mu", "stable")


def row_for(chi: float, a0: float, a1: float, a2: float) -> dict:
    spec = constant_spec(a0, a1, a2, a0, a2, a1, chi1=chi, chi2=chi)
    hyp = check_hypotheses(spec)
    row = dict.fromkeys(COLUMNS, "")
    row.update(chi=chi, h1=hyp.h1, h5=hyp.h5)
    if not hyp.h5:
        return row
    try:
        rect, trace = iterate_rectangle(spec, "R")
        closed = closed_form_rectangle(spec).rectangle
    except CoexistError as exc:
        row["stable"] = type(exc).__name__
        return row
    prof = check_average_condition(spec, closed)
    gap = float(np.max(np.abs(np.subtract(rect.as_tuple(), closed.as_tuple()))))
    row.update(zip(("lo1", "hi1", "lo2", "hi2"), closed.as_tuple()))
    row.update(iter_gap=gap, iterations=trace.iterations, mu=prof.mu_estimate, stable=prof.verdict)
    return row


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--chi-max", type=float, default=1.0)
    parser.add_argument("--steps", type=int, default=21)
    parser.add_argument("--a0", type=float, default=3.0)
    parser.add_argument("--a1", type=float, default=2.0, help="self-limitation a1 = b2")
    parser.add_argument("--a2", type=float, default=0.5, help="competition a2 = b1")
    parser.add_argument("--csv", help="also write the table here")
    args = parser.parse_args(argv)

    rows = [row_for(float(chi), args.a0, args.a1, args.a2)
            for chi in np.linspace(0.0, args.chi_max, args.steps)]
    fmt = lambda v: f"{v:.6g}" if isinstance(v, float) else str(v)
    print("  ".join(f"{c:>10}" for c in COLUMNS))
    for row in rows:
        print("  ".join(f"{fmt(row[c]):>10}" for c in COLUMNS))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
