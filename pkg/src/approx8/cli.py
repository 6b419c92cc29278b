"""Command-line interface: one executable, one subcommand per capability.

Exit codes: 0 success, 1 input or usage problem (bad flags, malformed
files), 2 configuration problem (values outside their documented domain).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import codecs, errorbench, mlp, perfmodel, tensorfile
from .codecs import DataTypeKind, DataTypeSpec, NormKind
from .datasets import load_dataset_dir
from .errors import ApproxError, ConfigError, InputError, UsageError

DTYPE_CHOICES = [k.value for k in DataTypeKind] + [mlp.ONEBIT]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through the package taxonomy
    # instead (unknown flag = usage problem = exit 1)
    def error(self, message: str):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _parse_norm(text: str) -> tuple[NormKind, int]:
    if text == "none":
        return NormKind.NONE, 0
    if text == "absmax":
        return NormKind.ABSMAX, 0
    if text.startswith("decade:"):
        try:
            return NormKind.DECADE, int(text.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad decade offset in --norm {text!r}") from exc
    raise UsageError(f"--norm must be none, absmax, or decade:N, got {text!r}")


def _spec_from_flags(dtype: str, norm: str) -> DataTypeSpec:
    kind = DataTypeKind(dtype)
    norm_kind, decades = _parse_norm(norm)
    return DataTypeSpec(kind, norm_kind, decades)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated floats, got {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_codebook(args) -> int:
    if args.dtype == mlp.ONEBIT:
        raise UsageError("onebit has no static codebook to dump")
    import io

    spec = _spec_from_flags(args.dtype, args.norm)
    buf = io.StringIO()
    codecs.build_codebook(spec).dump(buf)
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_encode(args) -> int:
    data = tensorfile.read_tensor(args.infile)
    if not isinstance(data, np.ndarray):
        raise InputError(f"{args.infile} already holds encoded data; expected raw floats")
    if args.dtype == mlp.ONEBIT:
        state = codecs.OneBitState.zeros(data.shape)
        q = codecs.onebit_quantize(data, state)
    else:
        spec = _spec_from_flags(args.dtype, args.norm)
        q = codecs.encode_buffer(data, codecs.build_codebook(spec))
    tensorfile.write_tensor(args.out, q)
    return 0


def _cmd_decode(args) -> int:
    data = tensorfile.read_tensor(args.infile)
    if isinstance(data, np.ndarray):
        raise InputError(f"{args.infile} holds raw floats; nothing to decode")
    if data.nbits == 1:
        decoded = codecs.onebit_decode(data)
    else:
        if args.dtype is not None:
            expected = _spec_from_flags(args.dtype, args.norm)
            if expected != data.spec:
                raise InputError(
                    f"{args.infile} was encoded as {data.spec.label()}, "
                    f"flags say {expected.label()}"
                )
        decoded = codecs.decode_buffer(data, codecs.build_codebook(data.spec))
    tensorfile.write_tensor(args.out, decoded)
    return 0


def _cmd_bench_error(args) -> int:
    reports = errorbench.run_error_suite(seed=args.seed, count=args.n)
    text = (
        errorbench.format_table(reports) if args.table else errorbench.reports_to_csv(reports)
    )
    _emit(text, args.out)
    return 0


def _cmd_predict(args) -> int:
    config = perfmodel.load_perf_config(args.config)
    bits = int(args.bits)
    if config.cluster is not None and (args.sub_batch or config.single_node is None):
        size = args.sub_batch or config.plan.sub_batch_size
        row = config.cluster.row(size)
        plan = perfmodel.ParallelPlan(
            n_gpus=config.profile.total_gpus,
            sub_batch_size=size,
            n_sub_batches=row.passes,
            payload_bits=bits,
            overlap_window_ms=config.cluster.overlap_window_ms,
            batch_size=config.cluster.batch_size,
        )
        report = perfmodel.predict_cluster(config, plan, kernel=args.kernel, mode=args.mode)
    else:
        from dataclasses import replace

        plan = replace(config.plan, payload_bits=bits)
        report = perfmodel.predict_single_node(config, plan, kernel=args.kernel)

    lines = [config.title, f"kernel {report.kernel}, {report.n_gpus} GPUs, {report.payload_bits}-bit payloads"]
    detail = f"baseline {report.baseline_total_ms:g} ms"
    if report.sub_batch_size is not None:
        detail += f", sub-batch {report.sub_batch_size}"
    detail += f", conv penalty {report.conv_penalty_ms:g} ms"
    if report.fc_penalty_ms is not None:
        detail += f", fc penalty {report.fc_penalty_ms:g} ms"
    if report.parallel_fc_ms is not None:
        detail += f", parallel fc {report.parallel_fc_ms:g} ms"
    lines.append(detail)
    flag = " (low confidence inputs)" if report.low_confidence else ""
    lines.append(f"speedup: {report.speedup:.2f}x{flag}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_sweep(args) -> int:
    config = perfmodel.load_perf_config(args.config)
    sizes = _parse_int_list(args.sizes, "--sizes") if args.sizes else None
    kernels = args.kernel.split(",") if args.kernel else None
    reports = perfmodel.sweep_sub_batch(config, sizes=sizes, kernels=kernels, mode=args.mode)
    text = (
        perfmodel.speedups_to_csv(reports)
        if args.csv
        else config.title + "\n" + perfmodel.format_speedup_table(reports)
    )
    _emit(text, args.out)
    return 0


def _mlp_config_from_flags(args) -> mlp.MlpConfig:
    return mlp.MlpConfig(
        layer_sizes=tuple(_parse_int_list(args.layers, "--layers")),
        dropout_rates=tuple(_parse_float_list(args.dropout, "--dropout")),
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def _cmd_train(args) -> int:
    data = load_dataset_dir(args.data)
    if args.n_train or args.n_test:
        data = data.subset(args.n_train or None, args.n_test or None)
    config = _mlp_config_from_flags(args)
    mode = mlp.HookMode(args.mode)
    spec = None
    if mode is not mlp.HookMode.NONE and args.dtype is not None:
        spec = mlp.ONEBIT if args.dtype == mlp.ONEBIT else _spec_from_flags(args.dtype, args.norm)
    report = mlp.train(config, mlp.QuantHookConfig(mode, spec), data)
    _emit(mlp.train_report_to_csv(report), args.out)
    return 0


def _cmd_parity(args) -> int:
    data = load_dataset_dir(args.data)
    if args.n_train or args.n_test:
        data = data.subset(args.n_train or None, args.n_test or None)
    config = _mlp_config_from_flags(args)
    result = mlp.parity_experiment(
        config,
        data,
        seeds=tuple(_parse_int_list(args.seeds, "--seeds")),
    )
    text = mlp.parity_to_csv(result) if args.csv else mlp.format_parity_table(result)
    _emit(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="approx8", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="dump a 256-entry decode table")
    p.add_argument("--dtype", required=True, choices=DTYPE_CHOICES)
    p.add_argument("--norm", default="none")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_codebook)

    p = sub.add_parser("encode", help="encode a float32 tensor file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", required=True, choices=DTYPE_CHOICES)
    p.add_argument("--norm", default="none")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode an encoded tensor file back to float32")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dtype", choices=DTYPE_CHOICES)
    p.add_argument("--norm", default="none")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("bench-error", help="distribution x codec error grid")
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", action="store_true", help="aligned text instead of CSV")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench_error)

    p = sub.add_parser("predict", help="speedup prediction from a benchmark config")
    p.add_argument("--config", required=True)
    p.add_argument("--bits", default="32", choices=["32", "8"])
    p.add_argument("--kernel")
    p.add_argument("--sub-batch", dest="sub_batch", type=int)
    p.add_argument("--mode", default="measured", choices=["measured", "derived"])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("sweep", help="cluster speedup grid over sub-batch sizes")
    p.add_argument("--config", required=True)
    p.add_argument("--sizes")
    p.add_argument("--kernel")
    p.add_argument("--mode", default="measured", choices=["measured", "derived"])
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    def add_train_flags(p):
        p.add_argument("--data", required=True, help="directory with the four IDX files")
        p.add_argument("--layers", default="784,128,128,10")
        p.add_argument("--dropout", default="0.2,0.3,0.3")
        p.add_argument("--lr", type=float, default=0.003)
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n-train", dest="n_train", type=int, default=0)
        p.add_argument("--n-test", dest="n_test", type=int, default=0)
        p.add_argument("--out")

    p = sub.add_parser("train", help="one training run, optionally quantized")
    add_train_flags(p)
    p.add_argument("--mode", default="none", choices=[m.value for m in mlp.HookMode])
    p.add_argument("--dtype", choices=DTYPE_CHOICES)
    p.add_argument("--norm", default="none")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("parity", help="codec-vs-baseline test error comparison")
    add_train_flags(p)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_parity)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ApproxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
