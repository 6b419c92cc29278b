#!/usr/bin/env python3
"""Train the reference MLP with every codec hooked in and compare test errors.

Runs 3 seeds x (1 baseline + 4 codecs x 2 parallelism modes) = 27 trainings;
expect minutes on a laptop CPU. Point --data at an IDX directory (see
make_dataset.py) or omit it to build the synthetic digits corpus in memory.
"""

import argparse

from approx8 import MlpConfig, format_parity_table, parity_experiment, parity_to_csv
from approx8.datasets import digits_dataset, load_dataset_dir


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", help="IDX directory; default: synthetic digits")
    ap.add_argument("--n-train", type=int, default=10_000)
    ap.add_argument("--n-test", type=int, default=5_000)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args()

    if args.data:
        data = load_dataset_dir(args.data).subset(args.n_train, args.n_test)
    else:
        data = digits_dataset(args.n_train, args.n_test)

    config = MlpConfig(epochs=args.epochs)
    result = parity_experiment(
        config, data, seeds=tuple(int(s) for s in args.seeds.split(","))
    )
    print(parity_to_csv(result) if args.csv else format_parity_table(result), end="")


if __name__ == "__main__":
    main()
