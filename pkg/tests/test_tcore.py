import numpy as np
import pytest

from conftest import rel_err
from tdict.errors import DimensionMismatch, InvalidTensor, SymmetryViolation
from tdict.tcore import (
    bcirc,
    fft_mode3,
    fold,
    fro_norm,
    fro_norm_complex,
    identity_tensor,
    ifft_mode3,
    l112_norm,
    tprod,
    tprod_circulant,
    ttranspose,
    tube_norms,
    unfold,
)

N3_VALUES = [1, 2, 3, 4, 5, 8]


def random_shapes(seed):
    r = np.random.default_rng(seed)
    n1, n2, n4 = r.integers(1, 9, size=3)
    n3 = N3_VALUES[seed % len(N3_VALUES)]
    return r, int(n1), int(n2), int(n4), n3


def convolution_oracle(A, B):
    """Direct definition: C(i, j, :) = sum_k A(i, k, :) circularly convolved with B(k, j, :)."""
    n1, n2, n3 = A.shape
    n4 = B.shape[1]
    C = np.zeros((n1, n4, n3))
    for i in range(n1):
        for j in range(n4):
            for k in range(n2):
                for t in range(n3):
                    for s in range(n3):
                        C[i, j, t] += A[i, k, s] * B[k, j, (t - s) % n3]
    return C


@pytest.mark.parametrize("seed", range(100))
def test_tprod_matches_convolution(seed):
    r, n1, n2, n4, n3 = random_shapes(seed)
    A = r.standard_normal((n1, n2, n3))
    B = r.standard_normal((n2, n4, n3))
    assert rel_err(tprod(A, B), convolution_oracle(A, B)) < 1e-10


@pytest.mark.parametrize("seed", range(100))
def test_algebraic_laws(seed):
    r, n1, n2, n4, n3 = random_shapes(seed)
    A = r.standard_normal((n1, n2, n3))
    B = r.standard_normal((n2, n4, n3))
    C = r.standard_normal((n4, 3, n3))

    # Associativity
    assert rel_err(tprod(tprod(A, B), C), tprod(A, tprod(B, C))) < 1e-10
    # Identity on both sides
    assert rel_err(tprod(identity_tensor(n1, n3), A), A) < 1e-12
    assert rel_err(tprod(A, identity_tensor(n2, n3)), A) < 1e-12
    # Transpose reverses products
    assert rel_err(ttranspose(tprod(A, B)), tprod(ttranspose(B), ttranspose(A))) < 1e-10
    # Parseval
    assert abs(fro_norm(A) - fro_norm_complex(fft_mode3(A)) / np.sqrt(n3)) <= 1e-12 * fro_norm(A)


def test_circulant_path_matches_fourier_path(rng):
    A = rng.standard_normal((3, 4, 5))
    B = rng.standard_normal((4, 2, 5))
    assert rel_err(tprod_circulant(A, B), tprod(A, B)) < 1e-12


def test_n3_one_is_matrix_product(rng):
    A = rng.standard_normal((4, 3, 1))
    B = rng.standard_normal((3, 5, 1))
    np.testing.assert_allclose(tprod(A, B)[:, :, 0], A[:, :, 0] @ B[:, :, 0], atol=1e-12)


def test_tprod_shape_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        tprod(rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 3, 4)))
    with pytest.raises(DimensionMismatch):
        tprod(rng.standard_normal((2, 3, 4)), rng.standard_normal((3, 3, 5)))


def test_ttranspose_example():
    A = np.zeros((1, 2, 3))
    A[0, :, 0] = [1, 2]
    A[0, :, 1] = [3, 4]
    A[0, :, 2] = [5, 6]
    At = ttranspose(A)
    assert At.shape == (2, 1, 3)
    np.testing.assert_array_equal(At[:, 0, 0], [1, 2])
    np.testing.assert_array_equal(At[:, 0, 1], [5, 6])
    np.testing.assert_array_equal(At[:, 0, 2], [3, 4])
    np.testing.assert_array_equal(ttranspose(At), A)


def test_identity_tensor():
    eye = identity_tensor(3, 4)
    np.testing.assert_array_equal(eye[:, :, 0], np.eye(3))
    assert not eye[:, :, 1:].any()
    with pytest.raises(InvalidTensor):
        identity_tensor(0, 4)


def test_invalid_inputs():
    with pytest.raises(InvalidTensor):
        tprod(np.ones((2, 2)), np.ones((2, 2)))
    bad = np.ones((2, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(InvalidTensor):
        tprod(bad, np.ones((2, 2, 2)))
    with pytest.raises(InvalidTensor):
        fft_mode3(np.ones((0, 2, 2)))


def test_ifft_rejects_asymmetric_spectrum():
    F = np.zeros((1, 1, 4), dtype=complex)
    F[0, 0, 1] = 1j
    with pytest.raises(SymmetryViolation):
        ifft_mode3(F)


def test_fft_round_trip(rng):
    A = rng.standard_normal((3, 2, 6))
    np.testing.assert_allclose(ifft_mode3(fft_mode3(A)), A, atol=1e-13)


def test_norms():
    A = np.zeros((2, 1, 2))
    A[0, 0] = [3.0, 4.0]
    A[1, 0] = [0.0, -2.0]
    np.testing.assert_allclose(tube_norms(A), [[5.0], [2.0]])
    assert l112_norm(A) == pytest.approx(7.0)
    assert fro_norm(A) == pytest.approx(np.sqrt(29.0))


def test_unfold_fold_and_bcirc(rng):
    A = rng.standard_normal((2, 3, 4))
    M = unfold(A)
    assert M.shape == (8, 3)
    np.testing.assert_array_equal(M[2:4], A[:, :, 1])
    np.testing.assert_array_equal(fold(M, 2, 3, 4), A)

    C = bcirc(A)
    assert C.shape == (8, 12)
    # First block column is unfold(A); block (i, j) holds slice (i - j) mod n3
    np.testing.assert_array_equal(C[:, :3], M)
    np.testing.assert_array_equal(C[0:2, 3:6], A[:, :, 3])
    # Transposing the tensor transposes its circulant matrix
    np.testing.assert_array_equal(bcirc(ttranspose(A)), C.T)


def test_constant_tube_transforms_to_dc():
    F = fft_mode3(np.full((1, 1, 5), 2.5))
    np.testing.assert_allclose(F.data[0, 0], [12.5, 0, 0, 0, 0], atol=1e-12)


def test_four_point_transform():
    A = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 4)
    F = fft_mode3(A)
    np.testing.assert_allclose(F.data[0, 0], [10, -2 + 2j, -2, -2 - 2j], atol=1e-12)
    np.testing.assert_allclose(ifft_mode3(F), A, atol=1e-12)


@pytest.mark.parametrize("n3", N3_VALUES)
def test_identity_is_identity_in_every_slice(n3):
    F = fft_mode3(identity_tensor(3, n3))
    for S in F.slices():
        np.testing.assert_allclose(S, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("n3", N3_VALUES)
def test_fft_round_trip_every_depth(rng, n3):
    A = rng.standard_normal((4, 3, n3))
    np.testing.assert_allclose(ifft_mode3(fft_mode3(A)), A, atol=1e-12)
