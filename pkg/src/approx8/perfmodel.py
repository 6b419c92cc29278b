"""Analytical speedup model for data/model-parallel training.

The model prices a training iteration from benchmark tables instead of
simulating it.  Its ingredients:

* transfer arithmetic on PCIe: pairs of slots share a switch, so a full
  intra-node synchronization between ``n`` GPUs costs ``n`` messages
  (1 message for the special case of 2 unpaired GPUs);
* an InfiniBand latency curve, interpolated log-linearly in message size;
* a pipelined inter-node broadcast: per round, the sub-gradient crosses
  PCIe once per peer GPU on the node and the InfiniBand fabric once, while
  per-hop latency is paid for each of the ``nodes - 1`` stops;
* overlap accounting: a synchronization only costs what sticks out past
  the computation it can hide under, ``max(0, sync - overlap)``.

Two speedup formulas come out of this.  Single node:

    speedup = n_gpus * total / ((total - fc) + conv_penalty
                                + n_sub_batches * parallel_fc + fc_penalty)

where ``conv_penalty`` is the one conv-layer sync with nothing left to
overlap (the first layer, whose gradients arrive last during backprop),
and ``fc_penalty`` aggregates the exposed slices of the fully connected
transfers.  Cluster:

    speedup = baseline_full_batch / (conv + conv_sync + fc_stage)

where ``fc_stage`` is either the measured stage total for a sub-batch size
(measured mode) or forward time plus per-pass exposed sync (derived mode).
Measured mode is the reference; the derived form is an approximation whose
per-pass inputs do not reproduce the published stage totals exactly.

Bandwidths are binary gigabytes (GiB/s) and table sizes binary kilobytes;
the published worked examples only come out right in those units.

All benchmark numbers live in TOML config files with sections
``[profile]``, ``[[layer]]``, ``[plan]``, and ``[single_node]`` or
``[cluster]``; nothing is hard-coded here.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from .errors import ConfigError, InputError, UsageError

GIB = float(1 << 30)
KIB = 1024.0


def _ms(nbytes: float, bandwidth_gib_s: float) -> float:
    return nbytes / (bandwidth_gib_s * GIB) * 1e3


# ---------------------------------------------------------------------------
# Domain types


def _check_curve(curve: tuple[tuple[float, float], ...], label: str) -> None:
    last = -math.inf
    for size, latency in curve:
        if size <= last:
            raise ConfigError(f"{label}: message sizes must be strictly increasing")
        if latency < 0:
            raise ConfigError(f"{label}: latencies must be >= 0")
        last = size


@dataclass(frozen=True)
class HardwareProfile:
    """Link bandwidths and topology of one machine or cluster."""

    pcie_bandwidth_gb: float
    ib_bandwidth_gb: float
    ib_latency_curve: tuple[tuple[float, float], ...] = ()
    ib_latency_curve_8bit: tuple[tuple[float, float], ...] = ()
    gpus_per_node: int = 1
    nodes: int = 1

    def __post_init__(self) -> None:
        if self.pcie_bandwidth_gb <= 0 or self.ib_bandwidth_gb <= 0:
            raise ConfigError("bandwidths must be > 0")
        if self.gpus_per_node < 1 or self.nodes < 1:
            raise ConfigError("gpus_per_node and nodes must be >= 1")
        object.__setattr__(self, "ib_latency_curve", tuple(map(tuple, self.ib_latency_curve)))
        object.__setattr__(
            self, "ib_latency_curve_8bit", tuple(map(tuple, self.ib_latency_curve_8bit))
        )
        _check_curve(self.ib_latency_curve, "ib_latency_curve")
        _check_curve(self.ib_latency_curve_8bit, "ib_latency_curve_8bit")

    @property
    def total_gpus(self) -> int:
        return self.gpus_per_node * self.nodes


class LayerKind(str, Enum):
    CONV = "conv"
    FC = "fc"
    ACTIVATION = "activation"


@dataclass(frozen=True)
class LayerBenchmark:
    """Measured compute and transfer costs of one layer (or activation)."""

    name: str
    kind: LayerKind
    fprop_ms: float = 0.0
    bprop_ms: float = 0.0
    update_ms: float = 0.0
    parallel_fprop_ms: Optional[float] = None
    parallel_bprop_ms: Optional[float] = None
    parallel_update_ms: Optional[float] = None
    transfer_mb_32bit: float = 0.0
    sync_ms_32bit: Optional[float] = None
    sync_ms_8bit: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LayerKind(self.kind))
        for name in (
            "fprop_ms",
            "bprop_ms",
            "update_ms",
            "parallel_fprop_ms",
            "parallel_bprop_ms",
            "parallel_update_ms",
            "transfer_mb_32bit",
            "sync_ms_32bit",
            "sync_ms_8bit",
        ):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"layer {self.name!r}: {name} must be >= 0")

    @property
    def transfer_mb_8bit(self) -> float:
        # one byte per element instead of four
        return self.transfer_mb_32bit / 4.0


@dataclass(frozen=True)
class ParallelPlan:
    """How a batch is split across GPUs and sub-batches."""

    n_gpus: int
    sub_batch_size: int
    n_sub_batches: int
    payload_bits: int = 32
    overlap_window_ms: float = 0.0
    batch_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.payload_bits not in (32, 8):
            raise ConfigError(f"payload_bits must be 32 or 8, got {self.payload_bits}")
        if self.n_gpus < 1 or self.sub_batch_size < 1 or self.n_sub_batches < 1:
            raise ConfigError("n_gpus, sub_batch_size, n_sub_batches must be >= 1")
        batch = self.batch_size
        if batch is None:
            object.__setattr__(self, "batch_size", self.sub_batch_size * self.n_sub_batches)
        elif self.n_sub_batches != math.ceil(batch / self.sub_batch_size):
            # ceil, not exact division: one published grid row (2056) is a
            # rounded label for a 12288 batch cut into 6 pieces
            raise ConfigError(
                f"{self.n_sub_batches} sub-batches of {self.sub_batch_size} "
                f"do not cover a batch of {batch}"
            )


@dataclass(frozen=True)
class SpeedupReport:
    """One predicted speedup plus the inputs that produced it."""

    kernel: str
    n_gpus: int
    payload_bits: int
    baseline_total_ms: float
    speedup: float
    mode: str = "single-node"
    sub_batch_size: Optional[int] = None
    conv_penalty_ms: float = 0.0
    fc_penalty_ms: Optional[float] = None
    parallel_fc_ms: Optional[float] = None
    low_confidence: bool = False

    def __post_init__(self) -> None:
        if not self.speedup > 0:
            raise ConfigError(f"speedup must be > 0, got {self.speedup}")
        if self.speedup > self.n_gpus * (1 + 1e-9):
            raise ConfigError(
                f"speedup {self.speedup:.3g} exceeds GPU count {self.n_gpus}"
            )


# ---------------------------------------------------------------------------
# Transfer-time primitives


def latency_lookup(profile: HardwareProfile, message_bytes: float, bits: int = 32) -> float:
    """Interpolate per-message latency, log-linear in message size.

    Queries outside the curve clamp to the nearest endpoint.
    """
    curve = profile.ib_latency_curve_8bit if bits == 8 else profile.ib_latency_curve
    if not curve:
        raise ConfigError("latency lookup requires a non-empty ib_latency_curve")
    if message_bytes <= curve[0][0]:
        return curve[0][1]
    if message_bytes >= curve[-1][0]:
        return curve[-1][1]
    sizes = [s for s, _ in curve]
    i = bisect.bisect_right(sizes, message_bytes) - 1
    (s0, l0), (s1, l1) = curve[i], curve[i + 1]
    frac = (math.log(message_bytes) - math.log(s0)) / (math.log(s1) - math.log(s0))
    return l0 + (l1 - l0) * frac


def intra_node_sync_ms(profile: HardwareProfile, payload_bytes: float, n_gpus: int) -> float:
    """Full gradient synchronization between the GPUs of one node.

    PCIe slots are paired behind switches, so with more than two GPUs every
    one of the ``n_gpus`` messages serializes on a shared switch; only the
    two-GPU case moves in a single message.
    """
    if n_gpus < 2:
        raise UsageError(f"intra-node sync needs at least 2 GPUs, got {n_gpus}")
    if payload_bytes < 0:
        raise UsageError("payload_bytes must be >= 0")
    messages = 1 if n_gpus == 2 else n_gpus
    return messages * _ms(payload_bytes, profile.pcie_bandwidth_gb)


def cluster_broadcast_ms(
    profile: HardwareProfile,
    payload_bytes: float,
    intra_share_bytes: Optional[float] = None,
    rounds: int = 2,
    bits: int = 32,
) -> float:
    """Broadcast a sub-gradient to every node of the cluster.

    Per round: the node's other GPUs each push their share over PCIe, the
    payload crosses InfiniBand once (transfers pipeline down the chain, so
    bandwidth is paid once), and per-message latency is paid at each of the
    ``nodes - 1`` hops.  Gradient synchronization runs two rounds (scatter
    the raw gradients, then broadcast the accumulated result); activations
    need one.
    """
    if profile.nodes < 2:
        raise UsageError(f"cluster broadcast needs at least 2 nodes, got {profile.nodes}")
    if rounds < 1:
        raise UsageError("rounds must be >= 1")
    if intra_share_bytes is None:
        intra_share_bytes = payload_bytes / profile.gpus_per_node
    per_round = (
        (profile.gpus_per_node - 1) * _ms(intra_share_bytes, profile.pcie_bandwidth_gb)
        + _ms(payload_bytes, profile.ib_bandwidth_gb)
        + (profile.nodes - 1) * latency_lookup(profile, payload_bytes, bits)
    )
    return rounds * per_round


def fc_penalty_ms(pairs: Sequence[tuple[float, float]], tail_ms: float) -> float:
    """Exposed fully-connected sync time: sum of max(0, sync - overlap) + tail."""
    if tail_ms < 0 or any(s < 0 or o < 0 for s, o in pairs):
        raise UsageError("fc penalty entries must be >= 0")
    return sum(max(0.0, s - o) for s, o in pairs) + tail_ms


# ---------------------------------------------------------------------------
# Benchmark bundles loaded from config files


@dataclass(frozen=True)
class KernelBaseline:
    """Whole-network time for one kernel library, per 128-image batch."""

    name: str
    total_ms: float
    # single-GPU time for the full cluster batch; defaults to
    # total_gpus * total_ms when a config does not pin the published rounding
    baseline_full_batch_ms: Optional[float] = None

    def __post_init__(self) -> None:
        if self.total_ms <= 0:
            raise ConfigError(f"kernel {self.name!r}: total_ms must be > 0")


@dataclass(frozen=True)
class SingleNodeBench:
    fc_total_ms: float
    parallel_fc_total_ms: Optional[float]
    kernels: tuple[KernelBaseline, ...]
    fc_penalty_ms_32bit: Optional[float] = None
    fc_penalty_ms_8bit: Optional[float] = None
    fc_overlap_pairs_32bit: tuple[tuple[float, float], ...] = ()
    fc_tail_ms_32bit: float = 0.0
    fc_overlap_pairs_8bit: tuple[tuple[float, float], ...] = ()
    fc_tail_ms_8bit: float = 0.0

    def penalty(self, bits: int) -> float:
        explicit = self.fc_penalty_ms_32bit if bits == 32 else self.fc_penalty_ms_8bit
        if explicit is not None:
            return explicit
        pairs = self.fc_overlap_pairs_32bit if bits == 32 else self.fc_overlap_pairs_8bit
        tail = self.fc_tail_ms_32bit if bits == 32 else self.fc_tail_ms_8bit
        return fc_penalty_ms(pairs, tail)


@dataclass(frozen=True)
class ClusterRow:
    """Measured fc-stage costs for one sub-batch size (whole 12k batch)."""

    size: int
    passes: int
    forward_ms: float
    sync_single_ms_32bit: float
    sync_single_ms_8bit: float
    total_ms_32bit: float
    total_ms_8bit: float
    sync_full_ms_32bit: Optional[float] = None
    sync_full_ms_8bit: Optional[float] = None
    low_confidence: bool = False

    def sync_single(self, bits: int) -> float:
        return self.sync_single_ms_32bit if bits == 32 else self.sync_single_ms_8bit

    def total(self, bits: int) -> float:
        return self.total_ms_32bit if bits == 32 else self.total_ms_8bit


@dataclass(frozen=True)
class ClusterBench:
    batch_size: int
    fc_single_gpu_ms: float
    conv_sync_ms: float
    overlap_window_ms: float
    kernels: tuple[KernelBaseline, ...]
    rows: tuple[ClusterRow, ...]

    def row(self, sub_batch_size: int) -> ClusterRow:
        for row in self.rows:
            if row.size == sub_batch_size:
                return row
        known = ", ".join(str(r.size) for r in self.rows)
        raise ConfigError(
            f"no cluster benchmark row for sub-batch {sub_batch_size} (have {known})"
        )


@dataclass(frozen=True)
class PerfConfig:
    title: str
    profile: HardwareProfile
    layers: tuple[LayerBenchmark, ...]
    plan: ParallelPlan
    single_node: Optional[SingleNodeBench] = None
    cluster: Optional[ClusterBench] = None

    def kernel(self, name: Optional[str], kernels: tuple[KernelBaseline, ...]) -> KernelBaseline:
        if name is None:
            return kernels[0]
        for k in kernels:
            if k.name == name:
                return k
        known = ", ".join(k.name for k in kernels)
        raise ConfigError(f"unknown kernel {name!r} (have {known})")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"config is missing {key!r} in {where}")
    return table[key]


def _pairs(raw) -> tuple[tuple[float, float], ...]:
    return tuple((float(a), float(b)) for a, b in raw)


def load_perf_config(path: str | Path) -> PerfConfig:
    """Parse a TOML benchmark file into a PerfConfig."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    prof_raw = _require(raw, "profile", str(path))
    profile = HardwareProfile(
        pcie_bandwidth_gb=float(_require(prof_raw, "pcie_bandwidth_gb", "[profile]")),
        ib_bandwidth_gb=float(_require(prof_raw, "ib_bandwidth_gb", "[profile]")),
        ib_latency_curve=tuple(
            (float(s) * KIB, float(l)) for s, l in prof_raw.get("ib_latency_curve_kib", [])
        ),
        ib_latency_curve_8bit=tuple(
            (float(s) * KIB, float(l)) for s, l in prof_raw.get("ib_latency_curve_kib_8bit", [])
        ),
        gpus_per_node=int(prof_raw.get("gpus_per_node", 1)),
        nodes=int(prof_raw.get("nodes", 1)),
    )

    layers = tuple(
        LayerBenchmark(
            name=_require(row, "name", "[[layer]]"),
            kind=LayerKind(_require(row, "kind", "[[layer]]")),
            fprop_ms=float(row.get("fprop_ms", 0.0)),
            bprop_ms=float(row.get("bprop_ms", 0.0)),
            update_ms=float(row.get("update_ms", 0.0)),
            parallel_fprop_ms=row.get("parallel_fprop_ms"),
            parallel_bprop_ms=row.get("parallel_bprop_ms"),
            parallel_update_ms=row.get("parallel_update_ms"),
            transfer_mb_32bit=float(row.get("transfer_mb_32bit", 0.0)),
            sync_ms_32bit=row.get("sync_ms_32bit"),
            sync_ms_8bit=row.get("sync_ms_8bit"),
        )
        for row in raw.get("layer", [])
    )

    plan_raw = _require(raw, "plan", str(path))
    plan = ParallelPlan(
        n_gpus=int(_require(plan_raw, "n_gpus", "[plan]")),
        sub_batch_size=int(_require(plan_raw, "sub_batch_size", "[plan]")),
        n_sub_batches=int(_require(plan_raw, "n_sub_batches", "[plan]")),
        payload_bits=int(plan_raw.get("payload_bits", 32)),
        overlap_window_ms=float(plan_raw.get("overlap_window_ms", 0.0)),
        batch_size=plan_raw.get("batch_size"),
    )

    single_node = None
    if "single_node" in raw:
        sn = raw["single_node"]
        single_node = SingleNodeBench(
            fc_total_ms=float(_require(sn, "fc_total_ms", "[single_node]")),
            parallel_fc_total_ms=sn.get("parallel_fc_total_ms"),
            kernels=tuple(
                KernelBaseline(k["name"], float(k["total_ms"]))
                for k in _require(sn, "kernels", "[single_node]")
            ),
            fc_penalty_ms_32bit=sn.get("fc_penalty_ms_32bit"),
            fc_penalty_ms_8bit=sn.get("fc_penalty_ms_8bit"),
            fc_overlap_pairs_32bit=_pairs(sn.get("fc_overlap_pairs_32bit", [])),
            fc_tail_ms_32bit=float(sn.get("fc_tail_ms_32bit", 0.0)),
            fc_overlap_pairs_8bit=_pairs(sn.get("fc_overlap_pairs_8bit", [])),
            fc_tail_ms_8bit=float(sn.get("fc_tail_ms_8bit", 0.0)),
        )

    cluster = None
    if "cluster" in raw:
        cl = raw["cluster"]
        cluster = ClusterBench(
            batch_size=int(_require(cl, "batch_size", "[cluster]")),
            fc_single_gpu_ms=float(_require(cl, "fc_single_gpu_ms", "[cluster]")),
            conv_sync_ms=float(cl.get("conv_sync_ms", 0.0)),
            overlap_window_ms=float(cl.get("overlap_window_ms", 0.0)),
            kernels=tuple(
                KernelBaseline(
                    k["name"],
                    float(k["total_ms"]),
                    k.get("baseline_full_batch_ms"),
                )
                for k in _require(cl, "kernels", "[cluster]")
            ),
            rows=tuple(
                ClusterRow(
                    size=int(_require(row, "size", "[[cluster.sub_batch]]")),
                    passes=int(_require(row, "passes", "[[cluster.sub_batch]]")),
                    forward_ms=float(_require(row, "forward_ms", "[[cluster.sub_batch]]")),
                    sync_single_ms_32bit=float(row.get("sync_single_ms_32bit", 0.0)),
                    sync_single_ms_8bit=float(row.get("sync_single_ms_8bit", 0.0)),
                    total_ms_32bit=float(_require(row, "total_ms_32bit", "[[cluster.sub_batch]]")),
                    total_ms_8bit=float(_require(row, "total_ms_8bit", "[[cluster.sub_batch]]")),
                    sync_full_ms_32bit=row.get("sync_full_ms_32bit"),
                    sync_full_ms_8bit=row.get("sync_full_ms_8bit"),
                    low_confidence=bool(row.get("low_confidence", False)),
                )
                for row in cl.get("sub_batch", [])
            ),
        )

    return PerfConfig(
        title=str(raw.get("title", path.stem)),
        profile=profile,
        layers=layers,
        plan=plan,
        single_node=single_node,
        cluster=cluster,
    )


# ---------------------------------------------------------------------------
# Speedup predictions


def conv_sync_penalty(layers: Sequence[LayerBenchmark]) -> float:
    """Exposed conv sync: the first layer's, which nothing can hide.

    During backprop each conv layer's gradient sync overlaps the update
    computation still pending for earlier layers; the first layer's sync is
    the last one issued and pays full price.  Any other conv layer whose
    sync exceeds its update time would also poke out; that is not supposed
    to happen with sane benchmarks, so it only warns.
    """
    convs = [l for l in layers if l.kind is LayerKind.CONV]
    if not convs:
        return 0.0
    for layer in convs[1:]:
        sync = layer.sync_ms_32bit or 0.0
        if sync > layer.update_ms:
            warnings.warn(
                f"conv layer {layer.name!r}: sync {sync} ms exceeds update "
                f"{layer.update_ms} ms and may not fully overlap",
                stacklevel=2,
            )
    return convs[0].sync_ms_32bit or 0.0


def predict_single_node(
    config: PerfConfig,
    plan: Optional[ParallelPlan] = None,
    kernel: Optional[str] = None,
) -> SpeedupReport:
    """Speedup of one multi-GPU node over one GPU, for the planned batch split."""
    if config.single_node is None:
        raise ConfigError("config has no [single_node] section")
    bench = config.single_node
    if bench.parallel_fc_total_ms is None:
        raise ConfigError("single-node prediction requires parallel_fc_total_ms")
    plan = plan or config.plan
    k = config.kernel(kernel, bench.kernels)

    total = k.total_ms
    conv_penalty = conv_sync_penalty(config.layers)
    penalty = bench.penalty(plan.payload_bits)
    parallel_fc = bench.parallel_fc_total_ms
    parallel_time = (
        (total - bench.fc_total_ms)
        + conv_penalty
        + plan.n_sub_batches * parallel_fc
        + penalty
    )
    return SpeedupReport(
        kernel=k.name,
        n_gpus=plan.n_gpus,
        payload_bits=plan.payload_bits,
        baseline_total_ms=total,
        speedup=plan.n_gpus * total / parallel_time,
        mode="single-node",
        conv_penalty_ms=conv_penalty,
        fc_penalty_ms=penalty,
        parallel_fc_ms=parallel_fc,
    )


def predict_cluster(
    config: PerfConfig,
    plan: Optional[ParallelPlan] = None,
    kernel: Optional[str] = None,
    mode: str = "measured",
) -> SpeedupReport:
    """Speedup of the whole cluster over one GPU for the full batch."""
    if config.cluster is None:
        raise ConfigError("config has no [cluster] section")
    if mode not in ("measured", "derived"):
        raise ConfigError(f"mode must be 'measured' or 'derived', got {mode!r}")
    bench = config.cluster
    plan = plan or config.plan
    row = bench.row(plan.sub_batch_size)
    if plan.n_sub_batches != row.passes or math.ceil(
        bench.batch_size / plan.sub_batch_size
    ) != row.passes:
        raise ConfigError(
            f"plan of {plan.n_sub_batches} x {plan.sub_batch_size} does not match "
            f"the {row.passes}-pass benchmark row for batch {bench.batch_size}"
        )
    k = config.kernel(kernel, bench.kernels)
    total_gpus = config.profile.total_gpus
    baseline = (
        k.baseline_full_batch_ms
        if k.baseline_full_batch_ms is not None
        else total_gpus * k.total_ms
    )
    conv_ms = k.total_ms - bench.fc_single_gpu_ms
    if mode == "measured":
        fc_stage = row.total(plan.payload_bits)
    else:
        exposed = max(0.0, row.sync_single(plan.payload_bits) - plan.overlap_window_ms)
        fc_stage = row.forward_ms + row.passes * exposed
    parallel_time = conv_ms + bench.conv_sync_ms + fc_stage
    return SpeedupReport(
        kernel=k.name,
        n_gpus=total_gpus,
        payload_bits=plan.payload_bits,
        baseline_total_ms=baseline,
        speedup=baseline / parallel_time,
        mode=mode,
        sub_batch_size=plan.sub_batch_size,
        conv_penalty_ms=bench.conv_sync_ms,
        parallel_fc_ms=fc_stage,
        low_confidence=row.low_confidence,
    )


def sweep_sub_batch(
    config: PerfConfig,
    sizes: Optional[Sequence[int]] = None,
    kernels: Optional[Sequence[str]] = None,
    mode: str = "measured",
) -> list[SpeedupReport]:
    """Predict cluster speedups over sub-batch sizes, kernels, and bit widths."""
    if config.cluster is None:
        raise ConfigError("config has no [cluster] section")
    bench = config.cluster
    if sizes is None:
        sizes = [row.size for row in bench.rows]
    if not sizes:
        raise UsageError("sweep requires at least one sub-batch size")
    if kernels is None:
        kernels = [k.name for k in bench.kernels]
    reports = []
    for name in kernels:
        for size in sizes:
            row = bench.row(size)
            for bits in (32, 8):
                plan = ParallelPlan(
                    n_gpus=config.profile.total_gpus,
                    sub_batch_size=size,
                    n_sub_batches=row.passes,
                    payload_bits=bits,
                    overlap_window_ms=bench.overlap_window_ms,
                    batch_size=bench.batch_size,
                )
                reports.append(predict_cluster(config, plan, kernel=name, mode=mode))
    return reports


# ---------------------------------------------------------------------------
# Report rendering

CSV_HEADER = (
    "mode",
    "kernel",
    "sub_batch",
    "payload_bits",
    "baseline_total_ms",
    "conv_penalty_ms",
    "fc_penalty_ms",
    "parallel_fc_ms",
    "speedup",
    "low_confidence",
)


def speedups_to_csv(reports: Sequence[SpeedupReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(
            (
                r.mode,
                r.kernel,
                "" if r.sub_batch_size is None else r.sub_batch_size,
                r.payload_bits,
                f"{r.baseline_total_ms:g}",
                f"{r.conv_penalty_ms:g}",
                "" if r.fc_penalty_ms is None else f"{r.fc_penalty_ms:g}",
                "" if r.parallel_fc_ms is None else f"{r.parallel_fc_ms:g}",
                f"{r.speedup:.4f}",
                int(r.low_confidence),
            )
        )
    return buf.getvalue()


def format_speedup_table(reports: Sequence[SpeedupReport]) -> str:
    """Aligned grid: one row per (kernel, sub-batch), columns per bit width."""
    by_key: dict[tuple[str, Optional[int]], dict[int, SpeedupReport]] = {}
    for r in reports:
        by_key.setdefault((r.kernel, r.sub_batch_size), {})[r.payload_bits] = r
    lines = [f"{'kernel':<14}{'sub-batch':>10}{'32-bit':>10}{'8-bit':>10}"]
    for (kernel, size), cells in by_key.items():
        mark = "(?)" if any(c.low_confidence for c in cells.values()) else ""
        def cell(bits: int) -> str:
            r = cells.get(bits)
            return f"{r.speedup:.2f}x" if r else "--"
        size_label = "--" if size is None else str(size)
        lines.append(
            f"{kernel:<14}{size_label:>10}{cell(32):>10}{cell(8):>10} {mark}".rstrip()
        )
    return "\n".join(lines) + "\n"
