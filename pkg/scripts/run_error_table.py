#!/usr/bin/env python3
"""Print the distribution x codec error grid (text table or CSV)."""

import argparse

from approx8.errorbench import format_table, reports_to_csv, run_error_suite


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1_000_000, help="samples per cell")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args()

    reports = run_error_suite(seed=args.seed, count=args.n)
    print(reports_to_csv(reports) if args.csv else format_table(reports), end="")


if __name__ == "__main__":
    main()
