#!/usr/bin/env python3
"""Merge-scaling experiment: geometric-mean merge time against m, one series per m/n ratio.

Writes the full CSV report and prints a per-ratio log-log slope.

    python scripts/merge_scaling.py --ratios 1,0.1 --max-exp 15 -o scaling.csv
"""

import argparse
import sys
from pathlib import Path

from composable_ledger.bench import BenchConfig, fit_scaling, run_bench


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ratios", default="1,0.1,0.01")
    p.add_argument("--min-exp", type=int, default=6)
    p.add_argument("--max-exp", type=int, default=12)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--output", default="merge_scaling.csv")
    args = p.parse_args()

    config = BenchConfig(
        ratios=tuple(float(r) for r in args.ratios.split(",")),
        sizes=tuple(2 ** k for k in range(args.min_exp, args.max_exp + 1)),
        trials=args.trials,
        seed=args.seed,
        time_phases=True,
    )
    report = run_bench(config, progress=lambda msg: print(msg, file=sys.stderr))
    Path(args.output).write_text(report.to_csv())

    print(f"{'ratio':>6} {'m':>8} {'n':>9} {'geomean s':>11} {'per entry us':>13}")
    for (ratio, m), g in report.geomeans().items():
        n = report.cells()[(ratio, m)][0].n
        print(f"{ratio:>6} {m:>8} {n:>9} {g:>11.5f} {1e6 * g / m:>13.2f}")
    if len(config.sizes) >= 4:
        for ratio, slope in fit_scaling(report).items():
            print(f"ratio {ratio}: slope {slope:.3f}")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
