"""Round-trip error measurement for the 8-bit codecs.

The benchmark draws a large sample from a reference distribution, pushes it
through encode/decode, and reports two aggregates:

* mean absolute error, averaged over every element;
* mean relative error in percent, averaged over the non-zero elements only
  (zero inputs have no meaningful relative error).

``run_error_suite`` reproduces the standard comparison grid: four input
distributions crossed with the four codecs, each codec wearing the
normalization it was designed for (absmax for dynamic-tree and linear, a
decade offset for static-tree and mantissa).
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .codecs import DataTypeKind, DataTypeSpec, NormKind, roundtrip
from .errors import ConfigError, UsageError


DIST_UNIFORM01 = "uniform01"
DIST_NORMAL = "normal"


@dataclass(frozen=True)
class SampleSpec:
    """A reproducible draw: distribution, size, and seed."""

    distribution: str
    count: int
    seed: int
    mean: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.distribution not in (DIST_UNIFORM01, DIST_NORMAL):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.count < 1:
            raise ConfigError(f"sample count must be >= 1, got {self.count}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")

    def label(self) -> str:
        if self.distribution == DIST_UNIFORM01:
            return "U(0,1)"
        return f"N({self.mean:g},{self.sigma:g}^2)"


def sample(spec: SampleSpec) -> np.ndarray:
    """Draw the sample as float32, deterministically from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    if spec.distribution == DIST_UNIFORM01:
        data = rng.random(spec.count, dtype=np.float64)
    else:
        data = rng.normal(spec.mean, spec.sigma, spec.count)
    return data.astype(np.float32)


@dataclass(frozen=True)
class ErrorReport:
    spec: DataTypeSpec
    mean_abs_error: float
    mean_rel_error_pct: float
    count: int
    sample_label: str = ""
    seed: int = 0


def measure_error(x: np.ndarray, spec: DataTypeSpec) -> ErrorReport:
    """Round-trip ``x`` through the codec and report error aggregates."""
    arr = np.asarray(x)
    if arr.size == 0:
        raise UsageError("cannot measure error of an empty buffer")
    decoded = roundtrip(arr, spec)
    x64 = arr.astype(np.float64).ravel()
    d64 = decoded.astype(np.float64).ravel()
    abs_err = np.abs(x64 - d64)
    nonzero = x64 != 0
    rel_pct = (
        float(np.mean(abs_err[nonzero] / np.abs(x64[nonzero])) * 100.0)
        if nonzero.any()
        else 0.0
    )
    return ErrorReport(
        spec=spec,
        mean_abs_error=float(abs_err.mean()),
        mean_rel_error_pct=rel_pct,
        count=int(arr.size),
    )


# Suite layout: distributions x codecs, in the order results are reported.
SUITE_DISTRIBUTIONS: tuple[tuple[str, dict], ...] = (
    (DIST_UNIFORM01, {}),
    (DIST_NORMAL, {"mean": 0.0, "sigma": 1.0}),
    (DIST_NORMAL, {"mean": 0.0, "sigma": 10.0}),
    (DIST_NORMAL, {"mean": 0.0, "sigma": 0.2}),
)

SUITE_KINDS: tuple[DataTypeKind, ...] = (
    DataTypeKind.DYNAMIC_TREE,
    DataTypeKind.LINEAR,
    DataTypeKind.MANTISSA,
    DataTypeKind.STATIC_TREE,
)

def suite_spec(kind: DataTypeKind, dist: str, params: dict) -> DataTypeSpec:
    """The normalization each codec wears in the comparison grid.

    Tree/linear codecs use absmax.  The exponent-anchored codecs take a
    one-decade offset, bumped to two for the sigma-10 normal whose bulk
    sits a further decade up.
    """
    if kind in (DataTypeKind.DYNAMIC_TREE, DataTypeKind.LINEAR):
        return DataTypeSpec(kind, NormKind.ABSMAX)
    decades = 2 if params.get("sigma", 1.0) >= 10.0 else 1
    return DataTypeSpec(kind, NormKind.DECADE, decades)


def worker_count(n_tasks: int) -> int:
    """Thread pool width, capped by the APPROX8_THREADS environment variable."""
    cap = os.environ.get("APPROX8_THREADS")
    limit = os.cpu_count() or 1
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise ConfigError(f"APPROX8_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(limit, n_tasks))


def run_error_suite(
    seed: int = 0,
    count: int = 1_000_000,
    kinds: Sequence[DataTypeKind] = SUITE_KINDS,
) -> list[ErrorReport]:
    """Run the full distribution-by-codec grid.

    Each cell draws its own sample from ``seed + cell_index`` so results do
    not depend on execution order; cells run on a thread pool sized by
    ``worker_count``.
    """
    cells = []
    for d_idx, (dist, params) in enumerate(SUITE_DISTRIBUTIONS):
        for k_idx, kind in enumerate(kinds):
            cell_seed = seed + d_idx * len(kinds) + k_idx
            sspec = SampleSpec(dist, count, cell_seed, **params)
            cells.append((sspec, suite_spec(kind, dist, params)))

    def run_cell(cell: tuple[SampleSpec, DataTypeSpec]) -> ErrorReport:
        sspec, dspec = cell
        report = measure_error(sample(sspec), dspec)
        return ErrorReport(
            spec=report.spec,
            mean_abs_error=report.mean_abs_error,
            mean_rel_error_pct=report.mean_rel_error_pct,
            count=report.count,
            sample_label=sspec.label(),
            seed=sspec.seed,
        )

    with ThreadPoolExecutor(max_workers=worker_count(len(cells))) as pool:
        return list(pool.map(run_cell, cells))


CSV_HEADER = ("distribution", "datatype", "n", "mean_abs_error", "mean_rel_error_pct", "seed")


def reports_to_csv(reports: Iterable[ErrorReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(
            (
                r.sample_label,
                r.spec.label(),
                r.count,
                f"{r.mean_abs_error:.6e}",
                f"{r.mean_rel_error_pct:.4f}",
                r.seed,
            )
        )
    return buf.getvalue()


def format_table(reports: Sequence[ErrorReport]) -> str:
    """Aligned text rendering of suite results, grouped by distribution."""
    lines = [
        f"{'distribution':<14}{'datatype':<24}{'mean abs err':>14}{'mean rel err %':>16}"
    ]
    for r in reports:
        lines.append(
            f"{r.sample_label:<14}{r.spec.label():<24}"
            f"{r.mean_abs_error:>14.3e}{r.mean_rel_error_pct:>16.3f}"
        )
    return "\n".join(lines) + "\n"
