#!/usr/bin/env python3
"""Reproduce the single-node and cluster speedup tables from the shipped configs."""

import argparse
from dataclasses import replace
from pathlib import Path

from approx8.perfmodel import (
    format_speedup_table,
    load_perf_config,
    predict_single_node,
    sweep_sub_batch,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--single-config", default=str(CONFIG_DIR / "alexnet_4gpu.toml"))
    ap.add_argument("--cluster-config", default=str(CONFIG_DIR / "alexnet_cluster.toml"))
    ap.add_argument("--mode", default="measured", choices=["measured", "derived"])
    args = ap.parse_args()

    single = load_perf_config(args.single_config)
    print(single.title)
    reports = []
    for kernel in single.single_node.kernels:
        for bits in (32, 8):
            plan = replace(single.plan, payload_bits=bits)
            reports.append(predict_single_node(single, plan, kernel=kernel.name))
    print(format_speedup_table(reports))

    cluster = load_perf_config(args.cluster_config)
    print(cluster.title)
    print(format_speedup_table(sweep_sub_batch(cluster, mode=args.mode)))


if __name__ == "__main__":
    main()
