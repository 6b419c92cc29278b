"""MLP training simulator with quantization injected at parallelism seams.

The network is a plain fully connected classifier: ReLU hidden units,
softmax cross-entropy output, inverted dropout, RMSProp updates.  Nothing
here is actually distributed; instead, the tensors that WOULD cross devices
are pushed through a codec round-trip mid-training:

* data-parallel mode quantizes every weight and bias gradient right before
  the optimizer step (what gradient synchronization would transmit);
* model-parallel mode quantizes the post-dropout hidden activations and the
  logits on the forward pass, and the error signals entering each hidden
  boundary on the backward pass (what peers would exchange per layer).

Mode ``none`` (or a hook config without a codec) runs bit-exact float64
training, and because the three RNG streams (init, shuffle, dropout) are
spawned independently of the hooks, a hooked run visits exactly the same
batches, masks, and initial weights as its baseline.  Evaluation is always
done with exact arithmetic and dropout off, so reported test errors measure
the learned weights alone.

``parity_experiment`` drives the comparison the simulator exists for:
train the same configuration under every codec and mode across several
seeds and tabulate final test errors against the 32-bit baseline, plus the
layer-wise approximation error triplets captured while training.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .codecs import (
    DataTypeKind,
    DataTypeSpec,
    NormKind,
    OneBitState,
    build_codebook,
    decode_buffer,
    encode_buffer,
    onebit_decode,
    onebit_quantize,
)
from .datasets import Dataset
from .errors import ConfigError, TrainingError

ONEBIT = "onebit"


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: tuple[int, ...] = (784, 128, 128, 10)
    dropout_rates: tuple[float, ...] = (0.2, 0.3, 0.3)
    learning_rate: float = 0.003
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    epochs: int = 10
    batch_size: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        object.__setattr__(self, "dropout_rates", tuple(float(r) for r in self.dropout_rates))
        if len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output widths")
        if any(s < 1 for s in self.layer_sizes):
            raise ConfigError("layer sizes must be >= 1")
        if len(self.dropout_rates) != len(self.layer_sizes) - 1:
            raise ConfigError(
                f"need one dropout rate per non-output layer: "
                f"{len(self.layer_sizes) - 1} rates for {len(self.layer_sizes)} layers"
            )
        if any(not (0.0 <= r < 1.0) for r in self.dropout_rates):
            raise ConfigError("dropout rates must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0.0 <= self.rmsprop_decay < 1.0):
            raise ConfigError("rmsprop_decay must lie in [0, 1)")
        if self.rmsprop_epsilon <= 0:
            raise ConfigError("rmsprop_epsilon must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


class HookMode(str, Enum):
    NONE = "none"
    DATA_PARALLEL = "data-parallel"
    MODEL_PARALLEL = "model-parallel"


@dataclass(frozen=True)
class QuantHookConfig:
    """What gets quantized during training, and with which codec."""

    mode: HookMode = HookMode.NONE
    spec: Union[DataTypeSpec, str, None] = None  # DataTypeSpec or "onebit"

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", HookMode(self.mode))
        if isinstance(self.spec, str) and self.spec != ONEBIT:
            raise ConfigError(f"string spec must be {ONEBIT!r}, got {self.spec!r}")
        if self.spec == ONEBIT and self.mode is HookMode.MODEL_PARALLEL:
            # error feedback accumulates a per-tensor residual across steps;
            # activations are fresh tensors every batch, so the scheme does
            # not transfer to the model-parallel seam
            raise ConfigError("onebit quantization only supports data-parallel mode")

    @property
    def active(self) -> bool:
        return self.mode is not HookMode.NONE and self.spec is not None

    def label(self) -> str:
        if not self.active:
            return "32-bit"
        name = ONEBIT if self.spec == ONEBIT else self.spec.label()
        return f"{name} [{self.mode.value}]"


@dataclass
class TrainReport:
    config: MlpConfig
    hooks: QuantHookConfig
    initial_loss: float
    train_losses: list[float]
    train_errors: list[float]
    test_errors: list[float]
    # site -> one (mean_abs_error, mean_rel_error_pct) pair per layer
    hook_stats: dict[str, list[tuple[float, float]]]

    @property
    def final_test_error(self) -> float:
        return self.test_errors[-1]


class _HookStats:
    """Accumulates approximation errors per (site, layer) across all steps."""

    def __init__(self) -> None:
        self._acc: dict[tuple[str, int], list[float]] = {}

    def record(self, site: str, layer: int, before: np.ndarray, after: np.ndarray) -> None:
        diff = np.abs(before - after)
        nonzero = before != 0
        acc = self._acc.setdefault((site, layer), [0.0, 0.0, 0, 0])
        acc[0] += float(diff.sum())
        acc[1] += float((diff[nonzero] / np.abs(before[nonzero])).sum())
        acc[2] += before.size
        acc[3] += int(nonzero.sum())

    def summary(self) -> dict[str, list[tuple[float, float]]]:
        out: dict[str, list[tuple[float, float]]] = {}
        for (site, layer) in sorted(self._acc):
            abs_sum, rel_sum, n, n_nonzero = self._acc[(site, layer)]
            pair = (
                abs_sum / n if n else 0.0,
                100.0 * rel_sum / n_nonzero if n_nonzero else 0.0,
            )
            out.setdefault(site, []).append(pair)
        return out


def _make_quantizer(spec: DataTypeSpec, stats: _HookStats, site: str) -> Callable:
    codebook = build_codebook(spec)

    def quantize(x: np.ndarray, layer: int) -> np.ndarray:
        decoded = decode_buffer(encode_buffer(x, codebook), codebook).astype(np.float64)
        stats.record(site, layer, x, decoded)
        return decoded

    return quantize


def glorot_init(
    config: MlpConfig, rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(config.layer_sizes, config.layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x: np.ndarray,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    fwd_hook: Optional[Callable] = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Returns (inputs to each matmul, pre-activations per layer)."""
    n_layers = len(weights)
    a = x if masks is None or masks[0] is None else x * masks[0]
    acts_in = [a]
    zs = []
    for l in range(n_layers):
        z = a @ weights[l] + biases[l]
        if l < n_layers - 1:
            h = np.maximum(z, 0.0)
            if masks is not None and masks[l + 1] is not None:
                h = h * masks[l + 1]
            if fwd_hook is not None:
                h = fwd_hook(h, l + 1)  # the activation shipped to the next device
            zs.append(z)
            acts_in.append(h)
            a = h
        else:
            if fwd_hook is not None:
                z = fwd_hook(z, l + 1)  # logits cross the final boundary too
            zs.append(z)
    return acts_in, zs


def _softmax_loss(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and softmax probabilities, numerically shifted."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(exp.sum(axis=1)) - (shifted * y).sum(axis=1)))
    return loss, probs


def _backward(
    weights: Sequence[np.ndarray],
    acts_in: Sequence[np.ndarray],
    zs: Sequence[np.ndarray],
    probs: np.ndarray,
    y: np.ndarray,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    bwd_hook: Optional[Callable] = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    n_layers = len(weights)
    batch = len(y)
    grads_w: list[np.ndarray] = [None] * n_layers
    grads_b: list[np.ndarray] = [None] * n_layers
    dz = (probs - y) / batch
    for l in range(n_layers - 1, -1, -1):
        grads_w[l] = acts_in[l].T @ dz
        grads_b[l] = dz.sum(axis=0)
        if l > 0:
            dh = dz @ weights[l].T  # the error signal shipped back across GPUs
            if bwd_hook is not None:
                dh = bwd_hook(dh, l)
            dz = dh * (zs[l - 1] > 0)
            if masks is not None and masks[l] is not None:
                dz = dz * masks[l]
    return grads_w, grads_b


def network_loss(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
) -> float:
    """Clean loss (no dropout, no hooks); the reference for gradient checks."""
    _, zs = _forward(weights, biases, x)
    loss, _ = _softmax_loss(zs[-1], y)
    return loss


def network_gradients(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Clean analytic gradients matching ``network_loss``."""
    acts_in, zs = _forward(weights, biases, x)
    _, probs = _softmax_loss(zs[-1], y)
    return _backward(weights, acts_in, zs, probs, y)


def classification_error(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x: np.ndarray,
    labels: np.ndarray,
) -> float:
    _, zs = _forward(weights, biases, x)
    return float(np.mean(zs[-1].argmax(axis=1) != labels))


def train(config: MlpConfig, hooks: QuantHookConfig, data: Dataset) -> TrainReport:
    """Train the MLP, injecting codec round-trips per the hook config.

    Deterministic in ``config.seed``: initialization, batch order, and
    dropout each draw from their own spawned RNG stream, so changing the
    hook configuration never perturbs them.
    """
    sizes = config.layer_sizes
    if data.x_train.shape[1] != sizes[0] or data.y_train.shape[1] != sizes[-1]:
        raise TrainingError(
            f"data shapes {data.x_train.shape[1]}->{data.y_train.shape[1]} do not "
            f"match layer sizes {sizes[0]}->{sizes[-1]}"
        )

    init_ss, shuffle_ss, dropout_ss = np.random.SeedSequence(config.seed).spawn(3)
    weights, biases = glorot_init(config, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    stats = _HookStats()
    fwd_hook = bwd_hook = grad_hook = None
    onebit_states: dict[tuple[int, str], OneBitState] = {}
    if hooks.active:
        if hooks.spec == ONEBIT:
            def grad_hook(g: np.ndarray, layer: int, which: str) -> np.ndarray:
                key = (layer, which)
                if key not in onebit_states:
                    onebit_states[key] = OneBitState.zeros(g.shape)
                q = onebit_quantize(g, onebit_states[key])
                decoded = onebit_decode(q).astype(np.float64)
                stats.record("gradient", layer, g, decoded)
                return decoded
        elif hooks.mode is HookMode.DATA_PARALLEL:
            quantize = _make_quantizer(hooks.spec, stats, "gradient")
            def grad_hook(g: np.ndarray, layer: int, which: str) -> np.ndarray:
                return quantize(g, layer)
        else:
            fwd_hook = _make_quantizer(hooks.spec, stats, "forward")
            bwd_hook = _make_quantizer(hooks.spec, stats, "backward")

    x_train, y_train = data.x_train.astype(np.float64), data.y_train.astype(np.float64)
    labels_train, labels_test = data.labels_train, data.labels_test
    x_test = data.x_test.astype(np.float64)
    n = len(x_train)

    acc_w = [np.zeros_like(w) for w in weights]
    acc_b = [np.zeros_like(b) for b in biases]
    decay, eps, lr = config.rmsprop_decay, config.rmsprop_epsilon, config.learning_rate

    initial_loss = network_loss(weights, biases, x_train, y_train)
    train_losses, train_errors, test_errors = [], [], []

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            xb, yb = x_train[batch_idx], y_train[batch_idx]

            masks: list[Optional[np.ndarray]] = []
            widths = (sizes[0], *sizes[1:-1])
            for rate, width in zip(config.dropout_rates, widths):
                if rate > 0.0:
                    keep = dropout_rng.random((len(xb), width)) >= rate
                    masks.append(keep / (1.0 - rate))
                else:
                    masks.append(None)

            acts_in, zs = _forward(weights, biases, xb, masks, fwd_hook)
            loss, probs = _softmax_loss(zs[-1], yb)
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, batch {n_batches + 1}"
                )
            grads_w, grads_b = _backward(weights, acts_in, zs, probs, yb, masks, bwd_hook)

            if grad_hook is not None:
                grads_w = [grad_hook(g, l + 1, "W") for l, g in enumerate(grads_w)]
                grads_b = [grad_hook(g, l + 1, "b") for l, g in enumerate(grads_b)]

            for l in range(len(weights)):
                acc_w[l] = decay * acc_w[l] + (1.0 - decay) * grads_w[l] ** 2
                acc_b[l] = decay * acc_b[l] + (1.0 - decay) * grads_b[l] ** 2
                weights[l] -= lr * grads_w[l] / np.sqrt(acc_w[l] + eps)
                biases[l] -= lr * grads_b[l] / np.sqrt(acc_b[l] + eps)

            epoch_loss += loss
            n_batches += 1

        train_losses.append(epoch_loss / n_batches)
        train_errors.append(classification_error(weights, biases, x_train, labels_train))
        test_errors.append(classification_error(weights, biases, x_test, labels_test))

    return TrainReport(
        config=config,
        hooks=hooks,
        initial_loss=initial_loss,
        train_losses=train_losses,
        train_errors=train_errors,
        test_errors=test_errors,
        hook_stats=stats.summary() if hooks.active else {},
    )


# ---------------------------------------------------------------------------
# Parity experiment


def default_hook_spec(kind: DataTypeKind, mode: HookMode) -> DataTypeSpec:
    """Normalization defaults per codec and parallelism seam.

    Tree/linear codecs use absmax at both seams.  The exponent-anchored
    codecs read gradients unscaled (their decades already cover small
    magnitudes) and take a two-decade offset for activations and logits,
    whose magnitudes run up to the tens.
    """
    if kind in (DataTypeKind.DYNAMIC_TREE, DataTypeKind.LINEAR):
        return DataTypeSpec(kind, NormKind.ABSMAX)
    if mode is HookMode.MODEL_PARALLEL:
        return DataTypeSpec(kind, NormKind.DECADE, 2)
    return DataTypeSpec(kind, NormKind.NONE)


@dataclass
class ParityRow:
    label: str
    mode: HookMode
    test_errors: list[float]
    mean_error: float
    sd_error: float
    diff_pp: float  # mean minus baseline mean, in percentage points
    hook_stats: dict[str, list[tuple[float, float]]]


@dataclass
class ParityResult:
    baseline_errors: list[float]
    baseline_mean: float
    rows: list[ParityRow]
    seeds: tuple[int, ...]


def parity_experiment(
    config: MlpConfig,
    data: Dataset,
    specs: Optional[Sequence[Union[DataTypeSpec, str]]] = None,
    modes: Sequence[HookMode] = (HookMode.DATA_PARALLEL, HookMode.MODEL_PARALLEL),
    seeds: Sequence[int] = (0, 1, 2),
) -> ParityResult:
    """Final-test-error comparison of hooked runs against the exact baseline.

    Every cell (spec x mode) trains once per seed with identical data and
    identical RNG streams as the baseline.  When ``specs`` is omitted, each
    mode gets all four codecs with ``default_hook_spec`` normalizations.
    """
    if len(seeds) < 2:
        raise ConfigError("parity needs at least 2 seeds per cell")
    modes = [HookMode(m) for m in modes]

    def run(hooks: QuantHookConfig) -> list[TrainReport]:
        return [
            train(replace(config, seed=s), hooks, data)
            for s in seeds
        ]

    baseline = run(QuantHookConfig(HookMode.NONE))
    baseline_errors = [r.final_test_error for r in baseline]
    baseline_mean = float(np.mean(baseline_errors))

    rows = []
    for mode in modes:
        if mode is HookMode.NONE:
            cell_specs: Sequence = [None]
        elif specs is not None:
            cell_specs = specs
        else:
            cell_specs = [default_hook_spec(kind, mode) for kind in DataTypeKind]
        for spec in cell_specs:
            hooks = QuantHookConfig(mode, spec)
            reports = run(hooks)
            errors = [r.final_test_error for r in reports]
            rows.append(
                ParityRow(
                    label=hooks.label(),
                    mode=mode,
                    test_errors=errors,
                    mean_error=float(np.mean(errors)),
                    sd_error=float(np.std(errors)),
                    diff_pp=float((np.mean(errors) - baseline_mean) * 100.0),
                    hook_stats=reports[0].hook_stats,
                )
            )
    return ParityResult(
        baseline_errors=baseline_errors,
        baseline_mean=baseline_mean,
        rows=rows,
        seeds=tuple(seeds),
    )


def _triplet(pairs: Sequence[tuple[float, float]], which: int, fmt: str) -> str:
    return "/".join(format(p[which], fmt) for p in pairs)


def format_parity_table(result: ParityResult) -> str:
    lines = [
        f"baseline (32-bit): mean test error "
        f"{result.baseline_mean * 100:.2f}% over seeds {list(result.seeds)}",
        f"{'codec [mode]':<40}{'test err %':>12}{'sd':>8}{'vs 32-bit pp':>14}"
        f"  {'abs err/layer':<26}{'rel err %/layer':<20}",
    ]
    for row in result.rows:
        site = "gradient" if row.mode is HookMode.DATA_PARALLEL else "forward"
        pairs = row.hook_stats.get(site, [])
        lines.append(
            f"{row.label:<40}{row.mean_error * 100:>12.2f}{row.sd_error * 100:>8.2f}"
            f"{row.diff_pp:>+14.2f}  {_triplet(pairs, 0, '.2g'):<26}"
            f"{_triplet(pairs, 1, '.2g'):<20}".rstrip()
        )
    return "\n".join(lines) + "\n"


PARITY_CSV_HEADER = (
    "codec",
    "mode",
    "mean_test_error",
    "sd_test_error",
    "diff_vs_baseline_pp",
    "per_seed_errors",
    "abs_error_per_layer",
    "rel_error_pct_per_layer",
)


def parity_to_csv(result: ParityResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PARITY_CSV_HEADER)
    writer.writerow(
        (
            "32-bit",
            "none",
            f"{result.baseline_mean:.6f}",
            f"{np.std(result.baseline_errors):.6f}",
            "0.0",
            ";".join(f"{e:.6f}" for e in result.baseline_errors),
            "",
            "",
        )
    )
    for row in result.rows:
        site = "gradient" if row.mode is HookMode.DATA_PARALLEL else "forward"
        pairs = row.hook_stats.get(site, [])
        writer.writerow(
            (
                row.label,
                row.mode.value,
                f"{row.mean_error:.6f}",
                f"{row.sd_error:.6f}",
                f"{row.diff_pp:.4f}",
                ";".join(f"{e:.6f}" for e in row.test_errors),
                _triplet(pairs, 0, ".4g"),
                _triplet(pairs, 1, ".4g"),
            )
        )
    return buf.getvalue()


TRAIN_CSV_HEADER = ("epoch", "train_loss", "train_error", "test_error")


def train_report_to_csv(report: TrainReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAIN_CSV_HEADER)
    for i, (loss, tr, te) in enumerate(
        zip(report.train_losses, report.train_errors, report.test_errors), start=1
    ):
        writer.writerow((i, f"{loss:.6f}", f"{tr:.6f}", f"{te:.6f}"))
    for site, pairs in report.hook_stats.items():
        writer.writerow(())
        writer.writerow((f"# {site} approximation error per layer",))
        writer.writerow(("layer", "mean_abs_error", "mean_rel_error_pct"))
        for layer, (abs_err, rel_err) in enumerate(pairs, start=1):
            writer.writerow((layer, f"{abs_err:.6g}", f"{rel_err:.4f}"))
    return buf.getvalue()
