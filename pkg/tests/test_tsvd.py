import numpy as np
import pytest

from conftest import rel_err
from tdict.errors import RankOutOfRange
from tdict.tcore import fro_norm, identity_tensor, tprod, ttranspose
from tdict.tsvd import truncate, tsvd, tubal_rank, tubal_rank1_approx

SHAPES = [(4, 3, 1), (3, 5, 2), (6, 6, 4), (5, 2, 5), (2, 7, 8), (7, 4, 3)]


@pytest.mark.parametrize("shape", SHAPES)
def test_tsvd_reconstructs(rng, shape):
    M = rng.standard_normal(shape)
    F = tsvd(M)
    rebuilt = tprod(tprod(F.U, F.S), ttranspose(F.V))
    assert rel_err(rebuilt, M) < 1e-8
    assert rel_err(truncate(F, min(shape[:2])), M) < 1e-8


@pytest.mark.parametrize("shape", SHAPES)
def test_factors_are_orthogonal(rng, shape):
    n1, n2, n3 = shape
    F = tsvd(rng.standard_normal(shape))
    assert fro_norm(tprod(ttranspose(F.U), F.U) - identity_tensor(n1, n3)) < 1e-8
    assert fro_norm(tprod(ttranspose(F.V), F.V) - identity_tensor(n2, n3)) < 1e-8


@pytest.mark.parametrize("shape", SHAPES)
def test_singular_values_ordered(rng, shape):
    F = tsvd(rng.standard_normal(shape))
    assert np.all(np.diff(F.spectrum, axis=1) <= 1e-12)
    assert np.all(F.spectrum >= 0)
    # S is f-diagonal
    n1, n2, _ = shape
    off = ~np.eye(n1, n2, dtype=bool)
    assert np.abs(F.S[off]).max(initial=0.0) < 1e-12


def test_n3_one_matches_matrix_svd(rng):
    M = rng.standard_normal((5, 3, 1))
    F = tsvd(M)
    np.testing.assert_allclose(F.spectrum[0], np.linalg.svd(M[:, :, 0], compute_uv=False))


@pytest.mark.parametrize("seed", range(20))
def test_truncation_beats_random_competitors(seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((6, 6, 4))
    k = 2
    best = fro_norm(M - truncate(tsvd(M), k))
    for _ in range(50):
        A = r.standard_normal((6, k, 4))
        B = r.standard_normal((k, 6, 4))
        assert best <= fro_norm(M - tprod(A, B))


def test_truncate_rank_bounds(rng):
    F = tsvd(rng.standard_normal((4, 3, 2)))
    with pytest.raises(RankOutOfRange):
        truncate(F, 0)
    with pytest.raises(RankOutOfRange):
        truncate(F, 4)


def test_tubal_rank(rng):
    A = rng.standard_normal((5, 2, 4))
    B = rng.standard_normal((2, 6, 4))
    assert tubal_rank(tprod(A, B)) == 2
    assert tubal_rank(np.zeros((3, 3, 2))) == 0
    assert tubal_rank(rng.standard_normal((3, 4, 3))) == 3


def separated_tensor(seed):
    """8 x 5 x 4 tensor with t-singular tubes 10, 1, 0.5, 0.2, 0.1 (delta tubes)."""
    r = np.random.default_rng(seed)
    U = tsvd(r.standard_normal((8, 8, 4))).U[:, :5, :]
    V = tsvd(r.standard_normal((5, 5, 4))).V
    S = np.zeros((5, 5, 4))
    S[np.arange(5), np.arange(5), 0] = [10.0, 1.0, 0.5, 0.2, 0.1]
    return tprod(tprod(U, S), ttranspose(V))


@pytest.mark.parametrize("seed", range(5))
def test_rank1_power_iteration_matches_truncation(seed):
    M = separated_tensor(seed)
    expected = truncate(tsvd(M), 1)
    triplet = tubal_rank1_approx(M, rng=np.random.default_rng(seed))
    assert triplet.converged
    assert rel_err(triplet.reconstruct(), expected) < 1e-6
    # Unit left factor
    assert fro_norm(triplet.u) == pytest.approx(1.0, abs=1e-8)


def test_rank1_warm_start(rng):
    M = separated_tensor(11)
    start = rng.standard_normal((8, 1, 4))
    triplet = tubal_rank1_approx(M, start=start)
    assert rel_err(triplet.reconstruct(), truncate(tsvd(M), 1)) < 1e-6


def test_rank1_zero_tensor():
    triplet = tubal_rank1_approx(np.zeros((3, 2, 4)))
    assert fro_norm(triplet.reconstruct()) == 0.0
    assert fro_norm(triplet.u) == pytest.approx(1.0)


def test_rank1_of_rank1_tensor(rng):
    u = rng.standard_normal((4, 1, 3))
    v = rng.standard_normal((5, 1, 3))
    M = tprod(u, ttranspose(v))
    triplet = tubal_rank1_approx(M, rng=rng)
    assert rel_err(triplet.reconstruct(), M) < 1e-8


@pytest.mark.parametrize("n3", [1, 2, 5])
def test_identity_has_identity_singular_tensor(n3):
    F = tsvd(identity_tensor(4, n3))
    np.testing.assert_allclose(F.S, identity_tensor(4, n3), atol=1e-12)


def test_rank1_with_single_slice_matches_matrix_svd(rng):
    Q1, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    Q2, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    M = (Q1[:, :4] * [10.0, 1.0, 0.5, 0.1]) @ Q2.T
    triplet = tubal_rank1_approx(M[:, :, None], rng=rng)
    U, s, Vt = np.linalg.svd(M)
    expected = s[0] * np.outer(U[:, 0], Vt[0])
    assert rel_err(triplet.reconstruct()[:, :, 0], expected) < 1e-6
    assert triplet.converged
