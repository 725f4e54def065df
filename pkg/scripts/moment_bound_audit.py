#!/usr/bin/env python
"""Compare exact walk moments against the printed and repaired moment bounds.

For each (p, b) pair, levels just above the moment threshold, r in {b/8, b/4,
b/2, 3b/4} and n = 1..N, counts the cases where E|S_n|^r exceeds the bound and
reports the smallest bound/moment ratio.  A per-case CSV is written if --csv is
given.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from fractions import Fraction
from pathlib import Path

from padicwalk.core import Params
from padicwalk.emit import csv_table
from padicwalk.walk import exact_moment, moment_bound, moment_bound_repaired, thresholds

BOUNDS = {"printed": moment_bound, "repaired": moment_bound_repaired}


def audit(primes, exponents, levels_above: int, n_max: int):
    rows = []
    for p, b in itertools.product(primes, exponents):
        M = thresholds(p, b).M
        for m in range(M + 1, M + 1 + levels_above):
            params = Params(p, m, b)
            for frac in (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
                r = float(frac * params.b)
                for n in range(1, n_max + 1):
                    lhs = exact_moment(n, r, params)
                    rows.append([p, params.b, m, r, n, lhs] + [BOUNDS[k](n, r, params) for k in BOUNDS])
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--primes", nargs="+", type=int, default=[2, 3, 5])
    ap.add_argument("--exponents", nargs="+", default=["1/2", "1", "2"])
    ap.add_argument("--levels", type=int, default=3, help="levels above the threshold")
    ap.add_argument("--n-max", type=int, default=64)
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args(argv)

    exps = [Fraction(e) for e in args.exponents]
    rows = audit(args.primes, exps, args.levels, args.n_max)
    print(f"{'bound':<10} {'violations':>12} {'cases':>7} {'minRatio':>12}  first violation")
    for i, name in enumerate(BOUNDS):
        col = 6 + i
        bad = [r for r in rows if r[5] > r[col]]
        ratio = min(r[col] / r[5] for r in rows)
        first = "-" if not bad else "p={} b={} m={} r={:g} n={}".format(*bad[0][:5])
        print(f"{name:<10} {len(bad):>12} {len(rows):>7} {ratio:>12.6g}  {first}")
    if args.csv:
        header = ["p", "b", "m", "r", "n", "exactMoment"] + [f"{k}Bound" for k in BOUNDS]
        args.csv.write_text(csv_table(header, rows))
        print(f"wrote {args.csv}")
    worst = min(r[7] / r[5] for r in rows)
    return 0 if math.isfinite(worst) and worst >= 1 else 1


if __name__ == "__main__":
    sys.exit(main())
