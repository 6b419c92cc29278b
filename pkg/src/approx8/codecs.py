"""8-bit codecs for gradients and activations, plus a 1-bit error-feedback quantizer.

All four 8-bit formats share the same envelope: bit 7 is the sign, bits 6..0
carry the magnitude payload.  They differ in how the 128 payload values tile
the non-negative reals:

dynamic-tree
    Payload 0 is exact zero.  Any other payload is read as ``z`` leading zero
    bits, then a single 1 "flag" bit, then ``t = 6 - z`` tree bits ``k``.  The
    tree bits pick the center of one of ``2^t`` equal slices of [0.1, 1.0):

        T = 0.1 + (k + 0.5) * 0.9 / 2^t        value = T * 10^-z

    ``z`` acts as a per-value decimal exponent, so precision follows the
    magnitude of each individual number.  Smallest magnitude (payload 0x01):
    T = 0.55, z = 6, i.e. 5.5e-7.

static-tree
    Payload is a fixed split: 3 exponent bits ``e`` then 4 tree bits ``k``:

        value = (0.1 + (k + 0.5) * 0.9 / 16) * 10^-e

    Payload 0 is reserved for exact zero, which sacrifices the (e=0, k=0)
    leaf.  The negative twin of that leaf (byte 0x80) also reads as zero so
    the code space stays sign-symmetric.

mantissa
    A decimal mini-float: 3 exponent bits ``e``, 4 mantissa bits ``m``,
    value = m * 10^-e.  Only 114 of the 128 payloads are distinct (m = 0
    collapses across exponents, m = 10 aliases m = 1 of the next decade);
    duplicates decode naturally and the encoder never emits them.

linear
    value = payload / 127.  A plain fixed-point grid on [0, 1].

Normalization is applied before the table lookup and undone after:

* ``none``    -- scale 1.
* ``absmax``  -- divide by max|x| of the buffer (scale 1 for all-zero
  buffers); meaningful for dynamic-tree and linear, whose codebooks
  concentrate on [0, 1].
* ``decade d``-- divide by 10^d, d in [-7, 7]; meaningful for static-tree
  and mantissa, whose smallest exponent already anchors a decade.

Encoding maps each element to the nearest codebook value (ties break toward
the smaller magnitude), then attaches the sign bit.  The implementation is a
binary search over the sorted table of distinct non-negative values; tests
pin it against an exhaustive 256-way linear scan.

The 1-bit path is different in kind: ``onebit_quantize`` keeps a residual
carried across calls (error feedback), splits ``gradient + residual`` by
sign, and transmits one bit per element plus the two column means.  Over T
steps the residual telescopes: the sum of reconstructions equals the sum of
inputs minus the final residual, so nothing is ever silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import IO, Optional

import numpy as np

from .errors import ConfigError, InputError, UsageError

SIGN_MASK = 0x80
PAYLOAD_BITS = 7
CODE_COUNT = 256


class DataTypeKind(str, Enum):
    DYNAMIC_TREE = "dynamic-tree"
    STATIC_TREE = "static-tree"
    LINEAR = "linear"
    MANTISSA = "mantissa"


class NormKind(str, Enum):
    NONE = "none"
    ABSMAX = "absmax"
    DECADE = "decade"


# Which normalizations make sense for which codebook family.  absmax squeezes
# data into [0, 1] where the tree/linear grids live; decade offsets shift the
# exponent-anchored formats instead.
_ALLOWED_NORMS = {
    DataTypeKind.DYNAMIC_TREE: {NormKind.NONE, NormKind.ABSMAX},
    DataTypeKind.LINEAR: {NormKind.NONE, NormKind.ABSMAX},
    DataTypeKind.STATIC_TREE: {NormKind.NONE, NormKind.DECADE},
    DataTypeKind.MANTISSA: {NormKind.NONE, NormKind.DECADE},
}

DECADE_MIN, DECADE_MAX = -7, 7


@dataclass(frozen=True)
class DataTypeSpec:
    """One concrete codec: a codebook family plus its normalization."""

    kind: DataTypeKind
    normalization: NormKind = NormKind.NONE
    decades: int = 0

    def __post_init__(self) -> None:
        kind = DataTypeKind(self.kind)
        norm = NormKind(self.normalization)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "normalization", norm)
        if norm not in _ALLOWED_NORMS[kind]:
            raise ConfigError(
                f"normalization {norm.value!r} is not supported for {kind.value!r}"
            )
        if norm is NormKind.DECADE:
            if not (DECADE_MIN <= self.decades <= DECADE_MAX):
                raise ConfigError(
                    f"decade offset must lie in [{DECADE_MIN}, {DECADE_MAX}], "
                    f"got {self.decades}"
                )
        elif self.decades != 0:
            raise ConfigError("decades is only meaningful with decade normalization")

    def label(self) -> str:
        if self.normalization is NormKind.DECADE:
            return f"{self.kind.value}/decade{self.decades:+d}"
        return f"{self.kind.value}/{self.normalization.value}"


def _tree_center(k: int, t: int) -> float:
    # Center of slice k of [0.1, 1.0) split into 2^t equal parts.
    return 0.1 + (k + 0.5) * 0.9 / (1 << t)


def _payload_values(kind: DataTypeKind) -> np.ndarray:
    """Value of each 7-bit payload, as float64, before sign or scaling."""
    vals = np.zeros(128, dtype=np.float64)
    if kind is DataTypeKind.DYNAMIC_TREE:
        for p in range(1, 128):
            z = PAYLOAD_BITS - p.bit_length()  # leading zeros before the flag bit
            t = 6 - z
            k = p - (1 << t)  # strip the flag bit, keep the tree bits
            vals[p] = _tree_center(k, t) * 10.0 ** (-z)
    elif kind is DataTypeKind.STATIC_TREE:
        for p in range(1, 128):
            e, k = p >> 4, p & 0xF
            vals[p] = _tree_center(k, 4) * 10.0 ** (-e)
        # p == 0 stays 0.0: the (e=0, k=0) leaf is given up for an exact zero.
    elif kind is DataTypeKind.MANTISSA:
        for p in range(128):
            e, m = p >> 4, p & 0xF
            vals[p] = m * 10.0 ** (-e)
    elif kind is DataTypeKind.LINEAR:
        vals[:] = np.arange(128) / 127.0
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unknown data type kind: {kind!r}")
    return vals


@dataclass(frozen=True, eq=False)
class Codebook:
    """Decode table for all 256 codes plus search structures for encoding.

    ``decode_table[c]`` is the float32 value of code byte ``c`` before the
    normalization scale is re-applied.  ``sorted_values``/``sorted_codes``
    list the distinct non-negative values in ascending order together with
    the canonical (lowest) code byte for each.
    """

    spec: DataTypeSpec
    decode_table: np.ndarray
    sorted_values: np.ndarray  # float64 view used for binary search
    sorted_codes: np.ndarray

    @property
    def zero_code(self) -> int:
        return int(self.sorted_codes[0])

    def dump(self, out: IO[str]) -> None:
        """Write all 256 codes as 'code<TAB>value' lines, codes ascending."""
        for code in range(CODE_COUNT):
            out.write(f"0x{code:02x}\t{self.decode_table[code]:.9g}\n")


@lru_cache(maxsize=None)
def build_codebook(spec: DataTypeSpec) -> Codebook:
    payload = _payload_values(spec.kind)
    table = np.empty(CODE_COUNT, dtype=np.float32)
    table[:128] = payload
    table[128:] = -payload
    table[table == 0] = 0.0  # fold -0.0 from the sign-bit mirror into +0.0

    nonneg = table[:128].astype(np.float64)
    values, first = np.unique(nonneg, return_index=True)
    cb = Codebook(
        spec=spec,
        decode_table=table,
        sorted_values=values,
        sorted_codes=first.astype(np.uint8),
    )
    for arr in (cb.decode_table, cb.sorted_values, cb.sorted_codes):
        arr.setflags(write=False)
    return cb


@dataclass
class QuantizedTensor:
    """Encoded buffer plus everything needed to decode it.

    ``nbits == 8``: ``codes`` holds one byte per element.
    ``nbits == 1``: ``codes`` holds ``packbits`` output and the two column
    means ride along as ``pos_level``/``neg_level``.
    """

    codes: np.ndarray
    shape: tuple[int, ...]
    spec: Optional[DataTypeSpec]
    scale: float = 1.0
    nbits: int = 8
    pos_level: float = 0.0
    neg_level: float = 0.0

    @property
    def count(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


def _scale_for(flat: np.ndarray, spec: DataTypeSpec) -> float:
    if spec.normalization is NormKind.ABSMAX:
        peak = float(np.max(np.abs(flat))) if flat.size else 0.0
        scale = peak if peak > 0.0 else 1.0
    elif spec.normalization is NormKind.DECADE:
        scale = 10.0**spec.decades
    else:
        scale = 1.0
    # float32 so the value survives the wire format unchanged
    return float(np.float32(scale))


def encode_buffer(x: np.ndarray, codebook: Codebook) -> QuantizedTensor:
    """Quantize ``x`` to the nearest codebook values.

    Ties between two equidistant codebook values resolve toward the smaller
    magnitude.  Non-finite input raises ``InputError``.
    """
    arr = np.asarray(x)
    if arr.size and not np.all(np.isfinite(arr)):
        raise InputError("cannot encode non-finite values (NaN or Inf present)")
    shape = tuple(arr.shape)
    flat = arr.astype(np.float64, copy=False).ravel()
    spec = codebook.spec
    scale = _scale_for(flat, spec)
    if not flat.size:
        return QuantizedTensor(np.empty(0, np.uint8), shape, spec, scale)

    y = np.abs(flat) / scale
    vals = codebook.sorted_values
    idx = np.clip(np.searchsorted(vals, y), 1, len(vals) - 1)
    lo, hi = vals[idx - 1], vals[idx]
    # <= keeps ties on the smaller-magnitude side
    pick = np.where((y - lo) <= (hi - y), idx - 1, idx)
    codes = codebook.sorted_codes[pick]
    negative = (flat < 0) & (vals[pick] != 0)
    codes = np.where(negative, codes | SIGN_MASK, codes).astype(np.uint8)
    return QuantizedTensor(codes, shape, spec, scale)


def decode_buffer(q: QuantizedTensor, codebook: Codebook) -> np.ndarray:
    """Map codes back to float32 values, undoing the normalization scale."""
    if q.nbits != 8:
        raise UsageError("decode_buffer handles 8-bit tensors; use onebit_decode")
    if q.spec != codebook.spec:
        raise UsageError(
            f"tensor was encoded as {q.spec and q.spec.label()}, "
            f"codebook is {codebook.spec.label()}"
        )
    out = codebook.decode_table[q.codes] * np.float32(q.scale)
    return out.reshape(q.shape)


def roundtrip(x: np.ndarray, spec: DataTypeSpec) -> np.ndarray:
    """encode + decode in one step; the usual way to simulate the codec."""
    cb = build_codebook(spec)
    return decode_buffer(encode_buffer(x, cb), cb)


# ---------------------------------------------------------------------------
# 1-bit quantizer with error feedback


@dataclass
class OneBitState:
    """Residual carried between successive 1-bit quantizations of one tensor."""

    residual: np.ndarray

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "OneBitState":
        return cls(residual=np.zeros(shape, dtype=np.float64))


def onebit_quantize(g: np.ndarray, state: OneBitState) -> QuantizedTensor:
    """Quantize ``g + residual`` to one bit per element, updating ``state``.

    Elements are split by sign of the corrected value; each side is
    reconstructed as its own mean (0 if the side is empty).  The new residual
    is corrected-minus-reconstruction, so quantization error re-enters the
    next call instead of being lost.
    """
    arr = np.asarray(g, dtype=np.float64)
    if arr.shape != state.residual.shape:
        raise UsageError(
            f"gradient shape {arr.shape} does not match residual shape "
            f"{state.residual.shape}"
        )
    if arr.size and not np.all(np.isfinite(arr)):
        raise InputError("cannot encode non-finite values (NaN or Inf present)")

    corrected = arr + state.residual
    positive = corrected >= 0
    # levels are rounded to float32 here so that the residual accounts for
    # exactly what the receiver will reconstruct from the wire format
    pos_level = float(np.float32(corrected[positive].mean())) if positive.any() else 0.0
    neg_level = float(np.float32(corrected[~positive].mean())) if (~positive).any() else 0.0
    recon = np.where(positive, pos_level, neg_level)
    state.residual = corrected - recon
    return QuantizedTensor(
        codes=np.packbits(positive.ravel()),
        shape=tuple(arr.shape),
        spec=None,
        scale=1.0,
        nbits=1,
        pos_level=pos_level,
        neg_level=neg_level,
    )


def onebit_decode(q: QuantizedTensor) -> np.ndarray:
    """Reconstruct the two-level tensor transmitted by ``onebit_quantize``."""
    if q.nbits != 1:
        raise UsageError("onebit_decode expects a 1-bit tensor")
    bits = np.unpackbits(q.codes, count=q.count).astype(bool)
    out = np.where(bits, np.float32(q.pos_level), np.float32(q.neg_level))
    return out.reshape(q.shape)
