"""Tiny binary container for float buffers and their encoded forms.

Layout (all integers little-endian):

    offset  size  field
    0       4     magic b"A8T1"
    4       1     payload tag: 0 raw float32, 1 codec bytes, 2 packed bits
    5       1     codec kind: 0 none, 1 dynamic-tree, 2 static-tree,
                  3 linear, 4 mantissa
    6       1     normalization: 0 none, 1 absmax, 2 decade
    7       1     decade offset, signed
    8       1     rank (up to 8 dims)
    9       4*r   dims, uint32 each
    ...     4     scale, float32
    ...     4     pos_level, float32 (1-bit payloads)
    ...     4     neg_level, float32 (1-bit payloads)
    ...     *     payload: float32 array, one code byte per element, or
                  ceil(n/8) packbits bytes

Parse failures raise InputError naming the byte offset, so a truncated or
corrupted file is diagnosable from the message alone.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .codecs import DataTypeKind, DataTypeSpec, NormKind, QuantizedTensor
from .errors import ConfigError, InputError, UsageError

MAGIC = b"A8T1"
_HEADER_FMT = "<4sBBBbB"
TAG_FLOAT32 = 0
TAG_CODES = 1
TAG_BITS = 2
MAX_RANK = 8

_KIND_TO_TAG = {
    None: 0,
    DataTypeKind.DYNAMIC_TREE: 1,
    DataTypeKind.STATIC_TREE: 2,
    DataTypeKind.LINEAR: 3,
    DataTypeKind.MANTISSA: 4,
}
_TAG_TO_KIND = {v: k for k, v in _KIND_TO_TAG.items()}

_NORM_TO_TAG = {NormKind.NONE: 0, NormKind.ABSMAX: 1, NormKind.DECADE: 2}
_TAG_TO_NORM = {v: k for k, v in _NORM_TO_TAG.items()}

Tensor = Union[np.ndarray, QuantizedTensor]


def write_tensor(path: str | Path, tensor: Tensor) -> None:
    """Serialize a float32 array or QuantizedTensor to ``path``."""
    if isinstance(tensor, QuantizedTensor):
        if tensor.nbits == 8:
            tag = TAG_CODES
            if tensor.spec is None:
                raise UsageError("8-bit tensors must carry a DataTypeSpec")
            kind_tag = _KIND_TO_TAG[tensor.spec.kind]
            norm = tensor.spec.normalization
            decades = tensor.spec.decades
        else:
            tag = TAG_BITS
            kind_tag = 0
            norm = NormKind.NONE
            decades = 0
        shape = tensor.shape
        scale, pos, neg = tensor.scale, tensor.pos_level, tensor.neg_level
        payload = tensor.codes.astype(np.uint8).tobytes()
    else:
        arr = np.asarray(tensor, dtype=np.float32)
        tag, kind_tag, norm, decades = TAG_FLOAT32, 0, NormKind.NONE, 0
        shape = arr.shape
        scale, pos, neg = 1.0, 0.0, 0.0
        payload = arr.astype("<f4").tobytes()

    if len(shape) > MAX_RANK:
        raise UsageError(f"rank {len(shape)} exceeds the format maximum of {MAX_RANK}")
    header = struct.pack(
        _HEADER_FMT, MAGIC, tag, kind_tag, _NORM_TO_TAG[norm], decades, len(shape)
    )
    header += struct.pack(f"<{len(shape)}I", *shape)
    header += struct.pack("<fff", scale, pos, neg)
    Path(path).write_bytes(header + payload)


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    if offset + size > len(buf):
        raise InputError(
            f"truncated tensor file: need {size} bytes for {what} at byte "
            f"{offset}, file has {len(buf)}"
        )
    return buf[offset : offset + size], offset + size


def read_tensor(path: str | Path) -> Tensor:
    """Deserialize; returns float32 ndarray or QuantizedTensor per the tag."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    chunk, off = _take(buf, 0, struct.calcsize(_HEADER_FMT), "header")
    magic, tag, kind_tag, norm_tag, decades, rank = struct.unpack(_HEADER_FMT, chunk)
    if magic != MAGIC:
        raise InputError(f"bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if tag not in (TAG_FLOAT32, TAG_CODES, TAG_BITS):
        raise InputError(f"unknown payload tag {tag} at byte 4")
    if kind_tag not in _TAG_TO_KIND:
        raise InputError(f"unknown codec kind tag {kind_tag} at byte 5")
    if norm_tag not in _TAG_TO_NORM:
        raise InputError(f"unknown normalization tag {norm_tag} at byte 6")
    if rank > MAX_RANK:
        raise InputError(f"rank {rank} at byte 8 exceeds maximum {MAX_RANK}")

    chunk, off = _take(buf, off, 4 * rank, "dims")
    shape = struct.unpack(f"<{rank}I", chunk) if rank else ()
    chunk, off = _take(buf, off, 12, "scale metadata")
    scale, pos, neg = struct.unpack("<fff", chunk)

    count = 1
    for d in shape:
        count *= d

    if tag == TAG_FLOAT32:
        chunk, off = _take(buf, off, 4 * count, "float payload")
        return np.frombuffer(chunk, dtype="<f4").reshape(shape).copy()

    if tag == TAG_CODES:
        kind = _TAG_TO_KIND[kind_tag]
        if kind is None:
            raise InputError("code payload at byte 4 lacks a codec kind at byte 5")
        try:
            spec = DataTypeSpec(kind, _TAG_TO_NORM[norm_tag], decades)
        except ConfigError as exc:
            raise InputError(f"invalid codec header fields at bytes 5..7: {exc}") from exc
        chunk, off = _take(buf, off, count, "code payload")
        codes = np.frombuffer(chunk, dtype=np.uint8).copy()
        return QuantizedTensor(codes=codes, shape=shape, spec=spec, scale=scale)

    n_bytes = (count + 7) // 8
    chunk, off = _take(buf, off, n_bytes, "bit payload")
    codes = np.frombuffer(chunk, dtype=np.uint8).copy()
    return QuantizedTensor(
        codes=codes,
        shape=shape,
        spec=None,
        scale=scale,
        nbits=1,
        pos_level=pos,
        neg_level=neg,
    )
