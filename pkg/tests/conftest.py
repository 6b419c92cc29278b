"""Shared fixtures.

The training tests need an MNIST-like dataset.  If APPROX8_MNIST_DIR points
at a directory with the four IDX files, its images are used; otherwise a
synthetic 28x28 digits set is built from sklearn's 8x8 digits (upsampled and
augmented).  Either way the arrays have the same shape contract.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from approx8.datasets import Dataset, digits_dataset, load_dataset_dir


@pytest.fixture(scope="session")
def small_data() -> Dataset:
    # enough samples for loss-decrease checks without slowing the suite
    return digits_dataset(n_train=2000, n_test=500, seed=12345)


@pytest.fixture(scope="session")
def parity_data() -> Dataset:
    mnist_dir = os.environ.get("APPROX8_MNIST_DIR")
    if mnist_dir:
        data = load_dataset_dir(mnist_dir)
        return data.subset(10_000, 5_000)
    return digits_dataset(n_train=10_000, n_test=5_000, seed=12345)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
