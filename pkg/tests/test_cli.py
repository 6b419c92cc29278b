"""End-to-end CLI tests: every subcommand plus the exit-code contract."""

import csv
import io
import re

import numpy as np
import pytest

from approx8 import DataTypeKind, DataTypeSpec, NormKind, build_codebook, read_tensor, write_tensor
from approx8.cli import main
from approx8.datasets import write_dataset_dir

CONFIG_4GPU = "configs/alexnet_4gpu.toml"
CONFIG_CLUSTER = "configs/alexnet_cluster.toml"


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    """Four-file IDX directory with 8x8 images, ten classes."""
    rng = np.random.default_rng(99)
    root = tmp_path_factory.mktemp("idx")
    write_dataset_dir(
        root,
        rng.integers(0, 256, size=(30, 8, 8), dtype=np.uint8),
        rng.integers(0, 10, size=30, dtype=np.uint8),
        rng.integers(0, 256, size=(15, 8, 8), dtype=np.uint8),
        rng.integers(0, 10, size=15, dtype=np.uint8),
    )
    return root


TRAIN_FLAGS = ["--layers", "64,8,10", "--dropout", "0,0", "--epochs", "1", "--batch-size", "10"]


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_flag_is_usage_error(capsys):
    assert main(["codebook", "--dtype", "mantissa", "--frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand(capsys):
    assert main(["transcode"]) == 1


def test_missing_required_flag(capsys):
    assert main(["encode", "--out", "x.bin", "--dtype", "linear"]) == 1


def test_missing_input_file(tmp_path, capsys):
    out = tmp_path / "o.bin"
    assert main(["encode", "--in", str(tmp_path / "nope.bin"), "--out", str(out), "--dtype", "linear"]) == 1


def test_missing_config_file(capsys):
    assert main(["predict", "--config", "configs/nonexistent.toml"]) == 1


def test_domain_violation_is_config_error(capsys):
    # decade offsets are not defined for the dynamic tree codec
    assert main(["codebook", "--dtype", "dynamic-tree", "--norm", "decade:2"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_bad_decade_offset_is_usage_error(capsys):
    assert main(["codebook", "--dtype", "static-tree", "--norm", "decade:two"]) == 1


def test_unknown_kernel_is_config_error(capsys):
    assert main(["predict", "--config", CONFIG_4GPU, "--kernel", "nervana"]) == 2


def test_onebit_model_parallel_is_config_error(dataset_dir, capsys):
    code = main(
        ["train", "--data", str(dataset_dir), *TRAIN_FLAGS, "--mode", "model-parallel", "--dtype", "onebit"]
    )
    assert code == 2


def test_bad_layer_spec_is_config_error(dataset_dir, capsys):
    code = main(["train", "--data", str(dataset_dir), "--layers", "64", "--dropout", "0"])
    assert code == 2


# ---------------------------------------------------------------------------
# codebook


def test_codebook_dump(capsys):
    assert main(["codebook", "--dtype", "mantissa"]) == 0
    lines = capsys.readouterr().out.rstrip("\n").split("\n")
    assert len(lines) == 256
    assert lines[0].startswith("0x00\t")
    assert float(lines[0x12].split("\t")[1]) == pytest.approx(0.2)


def test_codebook_to_file_matches_stdout(tmp_path, capsys):
    target = tmp_path / "table.tsv"
    assert main(["codebook", "--dtype", "linear", "--out", str(target)]) == 0
    assert main(["codebook", "--dtype", "linear"]) == 0
    assert target.read_text() == capsys.readouterr().out


def test_codebook_onebit_rejected(capsys):
    assert main(["codebook", "--dtype", "onebit"]) == 1


# ---------------------------------------------------------------------------
# encode / decode


def test_encode_decode_roundtrip(tmp_path):
    cb = build_codebook(DataTypeSpec(DataTypeKind.DYNAMIC_TREE))
    values = cb.sorted_values[::5].astype(np.float32).reshape(-1, 1)
    src, coded, back = (tmp_path / n for n in ("src.bin", "coded.bin", "back.bin"))
    write_tensor(src, values)

    assert main(["encode", "--in", str(src), "--out", str(coded), "--dtype", "dynamic-tree"]) == 0
    assert main(["decode", "--in", str(coded), "--out", str(back)]) == 0

    decoded = read_tensor(back)
    assert decoded.dtype == np.float32
    assert np.array_equal(decoded, values)


def test_encode_is_deterministic(tmp_path, rng):
    src = tmp_path / "src.bin"
    write_tensor(src, rng.normal(size=(40,)).astype(np.float32))
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    for out in (a, b):
        assert main(["encode", "--in", str(src), "--out", str(out), "--dtype", "mantissa", "--norm", "decade:1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_onebit_cli_roundtrip(tmp_path, rng):
    src, coded, back = (tmp_path / n for n in ("s.bin", "c.bin", "b.bin"))
    g = rng.normal(size=(6, 4)).astype(np.float32)
    write_tensor(src, g)
    assert main(["encode", "--in", str(src), "--out", str(coded), "--dtype", "onebit"]) == 0
    assert main(["decode", "--in", str(coded), "--out", str(back)]) == 0
    out = read_tensor(back)
    assert out.shape == g.shape
    # one value per sign side
    assert len(np.unique(out)) <= 2


def test_decode_flag_mismatch(tmp_path, capsys):
    src, coded, back = (tmp_path / n for n in ("s.bin", "c.bin", "b.bin"))
    write_tensor(src, np.ones(4, dtype=np.float32))
    assert main(["encode", "--in", str(src), "--out", str(coded), "--dtype", "dynamic-tree"]) == 0
    assert main(["decode", "--in", str(coded), "--out", str(back), "--dtype", "mantissa"]) == 1
    assert "encoded as" in capsys.readouterr().err


def test_decode_raw_input_rejected(tmp_path, capsys):
    src = tmp_path / "s.bin"
    write_tensor(src, np.ones(4, dtype=np.float32))
    assert main(["decode", "--in", str(src), "--out", str(tmp_path / "o.bin")]) == 1


def test_encode_coded_input_rejected(tmp_path, capsys):
    src, coded = tmp_path / "s.bin", tmp_path / "c.bin"
    write_tensor(src, np.ones(4, dtype=np.float32))
    assert main(["encode", "--in", str(src), "--out", str(coded), "--dtype", "linear", "--norm", "absmax"]) == 0
    assert main(["encode", "--in", str(coded), "--out", str(tmp_path / "x.bin"), "--dtype", "linear"]) == 1


# ---------------------------------------------------------------------------
# predict / sweep


def test_predict_single_node(capsys):
    assert main(["predict", "--config", CONFIG_4GPU]) == 0
    out = capsys.readouterr().out
    assert "AlexNet, single node, 4 GPUs" in out
    assert "speedup: 3.53x" in out


def test_predict_single_node_8bit(capsys):
    assert main(["predict", "--config", CONFIG_4GPU, "--bits", "8"]) == 0
    assert "speedup: 3.67x" in capsys.readouterr().out


def test_predict_rejects_odd_bit_widths(capsys):
    assert main(["predict", "--config", CONFIG_4GPU, "--bits", "16"]) == 1


def test_predict_cluster_cell(capsys):
    code = main(
        ["predict", "--config", CONFIG_CLUSTER, "--sub-batch", "512", "--kernel", "NervanaGPU", "--bits", "8"]
    )
    assert code == 0
    speedup = float(re.search(r"speedup: ([\d.]+)x", capsys.readouterr().out).group(1))
    assert speedup == pytest.approx(39.3, rel=0.02)


def test_predict_flags_low_confidence(capsys):
    code = main(
        ["predict", "--config", CONFIG_CLUSTER, "--sub-batch", "12288", "--kernel", "convnet2", "--bits", "8"]
    )
    assert code == 0
    assert "(low confidence inputs)" in capsys.readouterr().out


def test_sweep_csv(tmp_path):
    target = tmp_path / "sweep.csv"
    code = main(
        ["sweep", "--config", CONFIG_CLUSTER, "--sizes", "128,256", "--kernel", "NervanaGPU",
         "--csv", "--out", str(target)]
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(target.read_text())))
    assert rows[0][:4] == ["mode", "kernel", "sub_batch", "payload_bits"]
    assert len(rows) == 5  # header + 2 sizes x 2 bit widths
    assert {r[2] for r in rows[1:]} == {"128", "256"}


def test_sweep_table(capsys):
    assert main(["sweep", "--config", CONFIG_CLUSTER]) == 0
    out = capsys.readouterr().out
    assert out.startswith("AlexNet, 32 nodes x 3 GPUs")
    # 2 kernels x 6 sizes below the header
    assert len(out.rstrip("\n").split("\n")) == 2 + 12
    assert "(?)" in out  # extrapolated cells are marked


# ---------------------------------------------------------------------------
# bench-error


def test_bench_error_csv(capsys):
    assert main(["bench-error", "--n", "400", "--seed", "3"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["distribution", "datatype", "n", "mean_abs_error", "mean_rel_error_pct", "seed"]
    assert len(rows) == 17  # 4 distributions x 4 codecs


def test_bench_error_table(tmp_path):
    target = tmp_path / "grid.txt"
    assert main(["bench-error", "--n", "400", "--table", "--out", str(target)]) == 0
    assert "U(0,1)" in target.read_text()


# ---------------------------------------------------------------------------
# train / parity


def test_train_cli_baseline(dataset_dir, capsys):
    assert main(["train", "--data", str(dataset_dir), *TRAIN_FLAGS]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["epoch", "train_loss", "train_error", "test_error"]
    assert len(rows) == 2
    assert 0.0 <= float(rows[1][3]) <= 1.0


def test_train_cli_quantized_appends_stats(dataset_dir, tmp_path):
    target = tmp_path / "run.csv"
    code = main(
        ["train", "--data", str(dataset_dir), *TRAIN_FLAGS,
         "--mode", "data-parallel", "--dtype", "static-tree", "--norm", "none", "--out", str(target)]
    )
    assert code == 0
    assert "# gradient approximation error per layer" in target.read_text()


def test_train_cli_subset(dataset_dir, capsys):
    assert main(["train", "--data", str(dataset_dir), *TRAIN_FLAGS, "--n-train", "20", "--n-test", "10"]) == 0


def test_parity_cli_csv(dataset_dir, capsys):
    code = main(["parity", "--data", str(dataset_dir), *TRAIN_FLAGS, "--seeds", "0,1", "--csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][0] == "codec"
    assert rows[1][0] == "32-bit"
    # 4 codecs per parallel mode after the baseline row
    assert len(rows) == 2 + 8
    modes = {r[1] for r in rows[2:]}
    assert modes == {"data-parallel", "model-parallel"}


def test_parity_cli_single_seed_rejected(dataset_dir, capsys):
    assert main(["parity", "--data", str(dataset_dir), *TRAIN_FLAGS, "--seeds", "0"]) == 2
