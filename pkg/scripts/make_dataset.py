#!/usr/bin/env python3
"""Generate the synthetic 28x28 digits corpus as a directory of IDX files.

The output directory is directly consumable by `approx8 train --data DIR`
and by the parity script.
"""

import argparse

from approx8.datasets import build_digits_dataset, write_dataset_dir


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="target directory")
    ap.add_argument("--n-train", type=int, default=10_000)
    ap.add_argument("--n-test", type=int, default=5_000)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()

    x_train, y_train, x_test, y_test = build_digits_dataset(
        args.n_train, args.n_test, args.seed
    )
    write_dataset_dir(args.out, x_train, y_train, x_test, y_test)
    print(f"wrote {len(x_train)} train / {len(x_test)} test images to {args.out}")


if __name__ == "__main__":
    main()
