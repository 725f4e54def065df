#!/usr/bin/env python
"""Run the convergence harness over several (p, b) pairs and save the reports.

Writes one JSON report per pair plus a summary CSV of the L1 gaps, and prints a
pass/fail line per pair.  Exits 1 if any harness assertion fails.

For non-integer b the step count floor(t * sigma * p^{mb}) rounds differently at
odd and even m, so the gaps shrink only on average and the strict-decrease
assertions can fail (try ``--pairs 2:1/2 --m-max 14``).

    python scripts/convergence_sweep.py --out results/sweep
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from padicwalk.cli import parse_rational
from padicwalk.convergence import run_convergence
from padicwalk.emit import csv_table, to_json
from padicwalk.walk import thresholds

DEFAULT_PAIRS = ("2:1", "2:2", "3:1", "3:2", "5:1")


def parse_pair(text: str) -> tuple[int, Fraction]:
    p, _, b = text.partition(":")
    return int(p), parse_rational(b, "b")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", nargs="+", default=list(DEFAULT_PAIRS), help="p:b pairs")
    ap.add_argument("--m-max", type=int, default=8)
    ap.add_argument("--times", nargs="+", default=["1/2", "1", "2"])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/convergence_sweep"))
    args = ap.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    times = [parse_rational(t, "time") for t in args.times]
    summary = []
    all_ok = True
    for text in args.pairs:
        p, b = parse_pair(text)
        # epsilon_m needs m >= N(p, b); never start below 3
        lo = max(3, math.ceil(thresholds(p, b).N))
        m_range = range(lo, max(lo, args.m_max) + 1)
        start = time.perf_counter()
        executor = ThreadPoolExecutor(args.workers) if args.workers > 1 else None
        try:
            report = run_convergence(p=p, b=b, m_range=m_range, times=times, seed=args.seed,
                                     samples=args.samples, executor=executor)
        except Exception as exc:
            print(f"[ERROR] p={p} b={b}: {exc}")
            all_ok = False
            continue
        finally:
            if executor:
                executor.shutdown()
        elapsed = time.perf_counter() - start
        name = f"p{p}_b{str(b).replace('/', 'over')}"
        (args.out / f"{name}.json").write_text(to_json(report.to_dict()) + "\n")
        for row in report.perM:
            summary.append([p, b, row["m"], row["t"], row["epsL1"], row["supGap"]])
        tag = "PASS" if report.passed else "FAIL"
        failed = ", ".join(a["name"] for a in report.failures())
        print(f"[{tag}] p={p} b={b} m={m_range.start}..{m_range.stop - 1} ({elapsed:.1f}s){' failed: ' + failed if failed else ''}")
        all_ok &= report.passed
    (args.out / "summary.csv").write_text(csv_table(["p", "b", "m", "t", "epsL1", "supGap"], summary))
    print(f"wrote {args.out}")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
