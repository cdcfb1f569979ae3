"""Shared test helpers: independent dense oracles for the sensing operator."""

from __future__ import annotations

import numpy as np
import pytest

from cassirecon import CassiOperator, CodedMask


def dense_operator_matrix(op: CassiOperator) -> np.ndarray:
    """Assemble Phi densely from the shift/mask rule, one entry at a time.

    Row index is the measurement pixel h * W' + (w + d*b); column index is the
    cube voxel b*H*W + h*W + w. Kept deliberately loop-based and separate from
    the production slicing code.
    """
    height, width, bands, d = op.height, op.width, op.bands, op.shift_step
    w_ext = width + d * (bands - 1)
    phi = np.zeros((height * w_ext, bands * height * width))
    for b in range(bands):
        for h in range(height):
            for w in range(width):
                row = h * w_ext + (w + d * b)
                col = b * height * width + h * width + w
                phi[row, col] = op.mask.data[h, w]
    return phi


def random_operator(rng: np.random.Generator, binary: bool = True) -> CassiOperator:
    """Small random instance with H, W <= 8, B <= 4, d <= 2."""
    height = int(rng.integers(2, 9))
    width = int(rng.integers(2, 9))
    bands = int(rng.integers(1, 5))
    d = int(rng.integers(0, 3))
    if binary:
        mask = (rng.random((height, width)) < 0.5).astype(float)
    else:
        mask = rng.uniform(0.1, 1.0, (height, width))
    return CassiOperator(CodedMask(mask), d, bands)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
