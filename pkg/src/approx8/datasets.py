"""IDX dataset files and a self-contained handwritten-digits dataset.

The IDX format is the classic big-endian container used by the MNIST
distribution: a 4-byte magic (two zero bytes, a dtype code, a rank byte),
``rank`` big-endian uint32 dims, then the raw array.  ``load_idx`` applies
the conventions this package's training code expects: unsigned-byte image
stacks come back as float32 matrices scaled to [0, 1] and flattened to one
row per sample; 1-D label vectors come back one-hot.

When the real MNIST files are not on disk, ``build_digits_dataset``
manufactures a stand-in with the same shape contract from scikit-learn's
bundled 8x8 handwritten digits: each source digit is upscaled to 28x28,
then augmented with seeded integer shifts and pixel noise until the
requested sample counts are reached.  It is a much easier problem than
MNIST but exercises identical code paths, and the builder is deterministic
in its seed.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_DTYPE_CODES = {
    np.dtype(np.uint8): 0x08,
    np.dtype(np.int8): 0x09,
    np.dtype(np.int16): 0x0B,
    np.dtype(np.int32): 0x0C,
    np.dtype(np.float32): 0x0D,
    np.dtype(np.float64): 0x0E,
}

# canonical MNIST-distribution file names, tried with and without .gz
IDX_FILE_NAMES = {
    "x_train": "train-images-idx3-ubyte",
    "y_train": "train-labels-idx1-ubyte",
    "x_test": "t10k-images-idx3-ubyte",
    "y_test": "t10k-labels-idx1-ubyte",
}


def _read_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx_raw(path: str | Path) -> np.ndarray:
    """Parse an IDX file into the ndarray it stores, native byte order."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"IDX file not found: {path}")
    buf = _read_bytes(path)
    if len(buf) < 4:
        raise InputError(f"{path}: truncated magic, need 4 bytes, file has {len(buf)}")
    zero, dtype_code, rank = struct.unpack(">HBB", buf[:4])
    if zero != 0:
        raise InputError(f"{path}: bad magic at byte 0: first two bytes must be zero")
    if dtype_code not in _IDX_DTYPES:
        raise InputError(f"{path}: unknown dtype code 0x{dtype_code:02x} at byte 2")
    header_end = 4 + 4 * rank
    if len(buf) < header_end:
        raise InputError(
            f"{path}: truncated at byte {len(buf)}: rank {rank} header needs "
            f"{header_end} bytes"
        )
    dims = struct.unpack(f">{rank}I", buf[4:header_end])
    dtype = _IDX_DTYPES[dtype_code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    actual = len(buf) - header_end
    if actual != expected:
        raise InputError(
            f"{path}: payload at byte {header_end} has {actual} bytes, "
            f"header promises {expected}"
        )
    data = np.frombuffer(buf, dtype=dtype, offset=header_end)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def one_hot(labels: np.ndarray, n_classes: Optional[int] = None) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and labels.min() < 0:
        raise InputError("labels must be non-negative for one-hot encoding")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    out = np.zeros((len(labels), n_classes), dtype=np.float32)
    out[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return out


def load_idx(path: str | Path, n_classes: Optional[int] = None) -> np.ndarray:
    """Load an IDX file in training-ready form.

    Image stacks (rank >= 2, unsigned byte) become float32 matrices in
    [0, 1], one flattened row per sample.  Label vectors (rank 1) become
    one-hot float32 matrices.  Other dtypes pass through unscaled.
    """
    raw = read_idx_raw(path)
    if raw.ndim == 1:
        return one_hot(raw, n_classes)
    flat = raw.reshape(len(raw), -1)
    if raw.dtype == np.uint8:
        return flat.astype(np.float32) / 255.0
    return flat.astype(np.float32)


def write_idx(path: str | Path, array: np.ndarray) -> None:
    """Write an ndarray as an IDX file (gzipped when the path ends in .gz)."""
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        raise InputError(f"IDX format does not support dtype {arr.dtype}")
    code = _DTYPE_CODES[arr.dtype]
    header = struct.pack(">HBB", 0, code, arr.ndim)
    header += struct.pack(f">{arr.ndim}I", *arr.shape)
    payload = arr.astype(_IDX_DTYPES[code]).tobytes()
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(header + payload)


@dataclass
class Dataset:
    """Flattened float32 inputs and one-hot targets for train and test."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def labels_train(self) -> np.ndarray:
        return self.y_train.argmax(axis=1)

    @property
    def labels_test(self) -> np.ndarray:
        return self.y_test.argmax(axis=1)

    def subset(self, n_train: Optional[int] = None, n_test: Optional[int] = None) -> "Dataset":
        return Dataset(
            x_train=self.x_train[:n_train],
            y_train=self.y_train[:n_train],
            x_test=self.x_test[:n_test],
            y_test=self.y_test[:n_test],
        )


def _find_idx_file(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise InputError(
        f"missing IDX file {stem}[.gz] in {directory}; expected the four "
        f"standard files {sorted(IDX_FILE_NAMES.values())}"
    )


def load_dataset_dir(directory: str | Path) -> Dataset:
    """Load the four canonically named IDX files from a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"dataset directory not found: {directory}")
    paths = {key: _find_idx_file(directory, stem) for key, stem in IDX_FILE_NAMES.items()}
    n_classes = 10  # digit datasets; keeps one-hot width stable across subsets
    data = Dataset(
        x_train=load_idx(paths["x_train"]),
        y_train=load_idx(paths["y_train"], n_classes),
        x_test=load_idx(paths["x_test"]),
        y_test=load_idx(paths["y_test"], n_classes),
    )
    if len(data.x_train) != len(data.y_train) or len(data.x_test) != len(data.y_test):
        raise InputError(f"image/label row counts disagree in {directory}")
    return data


def write_dataset_dir(directory: str | Path, images_train: np.ndarray, labels_train: np.ndarray, images_test: np.ndarray, labels_test: np.ndarray) -> None:
    """Write uint8 image stacks + labels as the four canonical IDX files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_idx(directory / IDX_FILE_NAMES["x_train"], images_train)
    write_idx(directory / IDX_FILE_NAMES["y_train"], labels_train)
    write_idx(directory / IDX_FILE_NAMES["x_test"], images_test)
    write_idx(directory / IDX_FILE_NAMES["y_test"], labels_test)


# ---------------------------------------------------------------------------
# Synthetic 28x28 digits from the scikit-learn 8x8 corpus


def _augment(
    base: np.ndarray,
    labels: np.ndarray,
    n_out: int,
    rng: np.random.Generator,
    max_shift: int = 3,
    noise_sigma: float = 0.02,
) -> tuple[np.ndarray, np.ndarray]:
    """Cycle through the base images with random shifts and pixel noise."""
    side = base.shape[1]
    out = np.empty((n_out, side, side), dtype=np.uint8)
    out_labels = np.empty(n_out, dtype=np.uint8)
    for i in range(n_out):
        j = i % len(base)
        img = base[j]
        dy, dx = rng.integers(-max_shift, max_shift + 1, size=2)
        shifted = np.zeros_like(img)
        ys = slice(max(dy, 0), side + min(dy, 0))
        xs = slice(max(dx, 0), side + min(dx, 0))
        ys_src = slice(max(-dy, 0), side + min(-dy, 0))
        xs_src = slice(max(-dx, 0), side + min(-dx, 0))
        shifted[ys, xs] = img[ys_src, xs_src]
        noisy = shifted + rng.normal(0.0, noise_sigma, shifted.shape)
        out[i] = np.clip(np.round(noisy * 255.0), 0, 255).astype(np.uint8)
        out_labels[i] = labels[j]
    return out, out_labels


def build_digits_dataset(
    n_train: int = 10_000, n_test: int = 5_000, seed: int = 12345
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """28x28 uint8 digit images derived from scikit-learn's digits corpus.

    The 1797 source digits are shuffled once, split into disjoint train/test
    pools, upscaled to 28x28, and then augmented (integer shifts up to 3 px,
    Gaussian pixel noise) until each pool reaches the requested size.
    Returns (train_images, train_labels, test_images, test_labels).
    """
    from scipy import ndimage
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = digits.images / 16.0
    labels = digits.target.astype(np.uint8)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(images))
    images, labels = images[order], labels[order]

    big = np.stack([np.clip(ndimage.zoom(img, 3.5, order=1), 0.0, 1.0) for img in images])
    n_pool_train = 1500
    train_imgs, train_labels = _augment(
        big[:n_pool_train], labels[:n_pool_train], n_train, rng
    )
    test_imgs, test_labels = _augment(
        big[n_pool_train:], labels[n_pool_train:], n_test, rng
    )
    return train_imgs, train_labels, test_imgs, test_labels


def digits_dataset(
    n_train: int = 10_000, n_test: int = 5_000, seed: int = 12345
) -> Dataset:
    """``build_digits_dataset`` packaged as a training-ready Dataset."""
    xi, yi, xt, yt = build_digits_dataset(n_train, n_test, seed)
    return Dataset(
        x_train=xi.reshape(len(xi), -1).astype(np.float32) / 255.0,
        y_train=one_hot(yi, 10),
        x_test=xt.reshape(len(xt), -1).astype(np.float32) / 255.0,
        y_test=one_hot(yt, 10),
    )
