import numpy as np
import pytest

from cassirecon import CassiOperator, CodedMask, SpectralCube, random_mask
from cassirecon.core import default_wavelengths
from cassirecon.exceptions import DimensionMismatchError

from conftest import dense_operator_matrix, random_operator


def test_identity_sensing_single_band():
    op = CassiOperator(CodedMask(np.ones((3, 4))), 0, 1)
    x = np.arange(12, dtype=float).reshape(1, 3, 4)
    assert (op.apply_array(x) == x[0]).all()


def test_hand_computed_two_band_shift():
    # H=1, W=1, B=2, d=1, mask=[1], cube [a; b] -> snapshot [a, b]
    op = CassiOperator(CodedMask(np.ones((1, 1))), 1, 2)
    x = np.array([[[3.0]], [[5.0]]])
    y = op.apply_array(x)
    assert y.shape == (1, 2)
    assert y[0, 0] == 3.0 and y[0, 1] == 5.0


def test_apply_matches_dense_oracle(rng):
    for _ in range(20):
        op = random_operator(rng)
        phi = dense_operator_matrix(op)
        x = rng.standard_normal((op.bands, op.height, op.width))
        got = op.apply_array(x).ravel()
        want = phi @ x.ravel()
        assert np.abs(got - want).max() <= 1e-12 * max(1.0, np.abs(want).max())


def test_adjoint_matches_dense_oracle(rng):
    for _ in range(20):
        op = random_operator(rng)
        phi = dense_operator_matrix(op)
        y = rng.standard_normal((op.height, op.width_ext))
        got = op.adjoint_array(y).ravel()
        want = phi.T @ y.ravel()
        assert np.abs(got - want).max() <= 1e-12 * max(1.0, np.abs(want).max())


def test_adjoint_identity(rng):
    for _ in range(20):
        op = random_operator(rng, binary=False)
        x = rng.standard_normal((op.bands, op.height, op.width))
        y = rng.standard_normal((op.height, op.width_ext))
        lhs = float(np.vdot(op.apply_array(x), y))
        rhs = float(np.vdot(x, op.adjoint_array(y)))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)


def test_diag_gram_matches_dense_oracle(rng):
    for _ in range(20):
        op = random_operator(rng, binary=False)
        phi = dense_operator_matrix(op)
        got = op.diag_gram().ravel()
        want = np.diag(phi @ phi.T)
        assert np.abs(got - want).max() <= 1e-12 * max(1.0, want.max())
        assert (got >= 0).all() and (got <= op.bands + 1e-12).all()


def test_gram_is_diagonal(rng):
    op = random_operator(rng)
    phi = dense_operator_matrix(op)
    gram = phi @ phi.T
    off = gram - np.diag(np.diag(gram))
    assert np.abs(off).max() == 0.0


def test_all_ones_mask_diag_counts_overlaps():
    op = CassiOperator(CodedMask(np.ones((2, 3))), 0, 3)
    assert (op.diag_gram() == 3.0).all()
    op1 = CassiOperator(CodedMask(np.ones((2, 3))), 0, 1)
    assert (op1.diag_gram() == 1.0).all()


def test_linearity(rng):
    op = random_operator(rng, binary=False)
    x1 = rng.standard_normal((op.bands, op.height, op.width))
    x2 = rng.standard_normal((op.bands, op.height, op.width))
    alpha = 1.7
    lhs = op.apply_array(alpha * x1 + x2)
    rhs = alpha * op.apply_array(x1) + op.apply_array(x2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


def test_shift_geometry_full_size():
    op = CassiOperator(CodedMask(np.ones((4, 256))), 2, 28)
    assert op.width_ext == 310


def test_apply_rejects_wrong_shape(rng):
    op = random_operator(rng)
    with pytest.raises(DimensionMismatchError):
        op.apply_array(np.zeros((op.bands + 1, op.height, op.width)))
    with pytest.raises(DimensionMismatchError):
        op.adjoint_array(np.zeros((op.height, op.width_ext + 1)))


class TestSimulate:
    def test_zero_sigma_equals_apply(self):
        op = CassiOperator(random_mask(8, 8, seed=0), 1, 3)
        cube = SpectralCube(
            np.random.default_rng(7).random((3, 8, 8)), default_wavelengths(3)
        )
        clean = op.apply(cube)
        sim = op.simulate(cube, 0.0, seed=42)
        assert (sim.data == clean.data).all()
        assert sim.noise_sigma == 0.0

    def test_same_seed_is_bitwise_identical(self):
        op = CassiOperator(random_mask(8, 8, seed=0), 1, 3)
        cube = SpectralCube(
            np.random.default_rng(7).random((3, 8, 8)), default_wavelengths(3)
        )
        a = op.simulate(cube, 0.05, seed=42)
        b = op.simulate(cube, 0.05, seed=42)
        assert (a.data == b.data).all()

    def test_noise_std_statistics(self):
        # 256x310 snapshot: sample std of the injected noise within 10% of sigma
        op = CassiOperator(random_mask(256, 256, seed=0), 2, 28)
        cube = SpectralCube(
            np.random.default_rng(1).random((28, 256, 256)), default_wavelengths(28)
        )
        clean = op.apply(cube)
        noisy = op.simulate(cube, 0.05, seed=3)
        std = float(np.std(noisy.data - clean.data))
        assert 0.045 <= std <= 0.055
        assert noisy.noise_sigma == 0.05


def test_random_mask_is_binary_and_seeded():
    a = random_mask(16, 16, seed=5)
    b = random_mask(16, 16, seed=5)
    assert (a.data == b.data).all()
    assert set(np.unique(a.data)) <= {0.0, 1.0}
    c = random_mask(16, 16, seed=6)
    assert (a.data != c.data).any()
