import numpy as np
import pytest

from tdict.errors import InsufficientData, ShapeMismatch
from tdict.ktsvd import Dictionary, atom_update, init_dictionary, train
from tdict.sparse import SparseCodeProblem, sparse_code
from tdict.synth import planted_model
from tdict.tcore import fro_norm, tprod


def unit_atoms(rng, d, K, n3):
    D = rng.standard_normal((d, K, n3))
    return D / np.sqrt(np.sum(D * D, axis=(0, 2)))[None, :, None]


def test_init_dictionary_samples_columns(rng):
    Y = rng.standard_normal((6, 20, 3))
    dictionary = init_dictionary(Y, 5, seed=4)
    assert dictionary.D.shape == (6, 5, 3)
    np.testing.assert_allclose(dictionary.atom_norms(), 1.0)
    normalized = Y / np.sqrt(np.sum(Y * Y, axis=(0, 2)))[None, :, None]
    for k in range(5):
        distances = np.sqrt(np.sum((normalized - dictionary.D[:, k:k + 1]) ** 2, axis=(0, 2)))
        assert distances.min() < 1e-12
    np.testing.assert_array_equal(init_dictionary(Y, 5, seed=4).D, dictionary.D)


def test_init_dictionary_needs_distinct_columns(rng):
    with pytest.raises(InsufficientData):
        init_dictionary(rng.standard_normal((4, 3, 2)), 5, seed=0)

    base = rng.standard_normal((4, 3, 2))
    Y = np.concatenate([base, 2.0 * base, np.zeros((4, 2, 2))], axis=1)
    with pytest.raises(InsufficientData):
        init_dictionary(Y, 4, seed=0)
    assert init_dictionary(Y, 3, seed=0).K == 3


def test_atom_update_does_not_increase_restricted_error(rng):
    d, K, n, n3 = 8, 6, 40, 4
    D = unit_atoms(rng, d, K, n3)
    Y = rng.standard_normal((d, n, n3))
    X = sparse_code(SparseCodeProblem(Y, D, 0.5)).X
    residual = Y - tprod(D, X)

    checked = 0
    for k in range(K):
        upd = atom_update(D, X, Y, k, residual=residual, rng=np.random.default_rng(k))
        if upd.support.size == 0:
            continue
        w = upd.support
        before = fro_norm(upd.restricted - tprod(D[:, k:k + 1], X[k:k + 1, w]))
        after = fro_norm(upd.restricted - tprod(upd.atom, upd.coefficients[:, w]))
        assert after <= before * (1 + 1e-9)
        assert fro_norm(upd.atom) == pytest.approx(1.0, abs=1e-8)
        # Coefficients vanish outside the support
        outside = np.setdiff1d(np.arange(n), w)
        assert not upd.coefficients[:, outside].any()
        checked += 1
    assert checked > 0


def test_unused_atom_is_replaced_by_worst_column(rng):
    d, K, n, n3 = 5, 3, 10, 2
    D = unit_atoms(rng, d, K, n3)
    Y = rng.standard_normal((d, n, n3))
    X = np.zeros((K, n, n3))
    X[0, :4] = rng.standard_normal((4, n3))
    residual = Y - tprod(D, X)
    norms = np.sqrt(np.sum(residual * residual, axis=(0, 2)))

    upd = atom_update(D, X, Y, 1, residual=residual)
    j = int(np.argmax(norms))
    assert upd.replaced_by == j
    # Normalized training column
    np.testing.assert_allclose(upd.atom, Y[:, j:j + 1] / np.linalg.norm(Y[:, j]))

    # Columns already used in this pass are skipped
    again = atom_update(D, X, Y, 2, residual=residual, exclude={j})
    assert again.replaced_by != j
    assert again.replaced_by is not None


def test_train_report_and_invariants(rng):
    Y = rng.standard_normal((6, 60, 3))
    dictionary, X, report = train(Y, 8, 0.3, sweeps=3, seed=1, min_improvement=None)
    assert report.sweeps == 3
    assert dictionary.sweeps == 3
    assert X.shape == (8, 60, 3)
    np.testing.assert_allclose(dictionary.atom_norms(), 1.0, atol=1e-8)
    for coding, represented in zip(report.coding_errors, report.representation_errors):
        assert represented <= coding + 1e-6
    assert report.representation_errors[-1] == pytest.approx(fro_norm(Y - tprod(dictionary.D, X)))

    df = report.to_frame()
    assert list(df.columns) == ["sweep", "coding_error", "representation_error", "atoms_replaced"]
    assert df["sweep"].tolist() == [1, 2, 3]


def test_train_is_deterministic(rng):
    Y = rng.standard_normal((6, 40, 2))
    first = train(Y, 5, 0.2, sweeps=2, seed=9)
    second = train(Y, 5, 0.2, sweeps=2, seed=9)
    np.testing.assert_array_equal(first[0].D, second[0].D)
    np.testing.assert_array_equal(first[1], second[1])


def test_train_single_sweep_and_early_exit(rng):
    Y = rng.standard_normal((6, 40, 2))
    _, _, report = train(Y, 5, 0.2, sweeps=1, seed=2)
    assert len(report.to_frame()) == 1

    dictionary, _, report = train(Y, 5, 0.2, sweeps=6, seed=2, min_improvement=0.9)
    assert report.sweeps == 2
    assert report.stopped_early
    assert dictionary.sweeps == 2


def test_train_needs_enough_columns(rng):
    with pytest.raises(InsufficientData):
        train(rng.standard_normal((4, 3, 2)), 5, 0.1, sweeps=1, seed=0)
    with pytest.raises(ValueError):
        train(rng.standard_normal((4, 10, 2)), 3, 0.1, sweeps=0, seed=0)


def test_dictionary_metadata_round_trip(rng):
    dictionary = Dictionary(
        D=unit_atoms(rng, 4, 3, 2), seed=5, sweeps=7, lam=0.1, rho=1.0, p=2, q=2, center=True, scale=255.0
    )
    meta = {k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in dictionary.metadata().items()}
    restored = Dictionary.from_metadata(dictionary.D, meta)
    assert restored.metadata() == dictionary.metadata()

    meta["K"] = "4"
    with pytest.raises(ShapeMismatch):
        Dictionary.from_metadata(dictionary.D, meta)


# n3 = 1: the same updates written directly with matrices


def soft_threshold(C, kappa):
    return np.sign(C) * np.maximum(np.abs(C) - kappa, 0.0)


def matrix_admm(Y, D, lam, rho, iters):
    K, n = D.shape[1], Y.shape[1]
    G = 2.0 * D.T @ D + rho * np.eye(K)
    Z = np.zeros((K, n))
    Q = np.zeros((K, n))
    for _ in range(iters):
        X = np.linalg.solve(G, 2.0 * D.T @ Y - Q + rho * Z)
        Z = soft_threshold(X + Q / rho, lam / rho)
        Q = Q + rho * (X - Z)
    return Z


def matrix_ksvd(Y, D0, lam, rho, iters, sweeps):
    D = D0.copy()
    K = D.shape[1]
    errors = []
    for _ in range(sweeps):
        X = matrix_admm(Y, D, lam, rho, iters)
        used = set()
        for k in range(K):
            E = Y - D @ X
            w = np.flatnonzero(X[k] != 0)
            if w.size == 0:
                norms = np.linalg.norm(E, axis=0)
                norms[list(used)] = -1.0
                j = int(np.argmax(norms))
                if norms[j] > 0:
                    D[:, k] = Y[:, j] / np.linalg.norm(Y[:, j])
                    used.add(j)
                continue
            R = E[:, w] + np.outer(D[:, k], X[k, w])
            u, s, vt = np.linalg.svd(R)
            sign = np.sign(u[np.argmax(np.abs(u[:, 0])), 0])
            D[:, k] = sign * u[:, 0]
            X[k, w] = sign * s[0] * vt[0]
        errors.append(np.linalg.norm(Y - D @ X))
    return D, X, errors


def test_n3_one_matches_matrix_ksvd(rng):
    Y = rng.standard_normal((8, 40, 1))
    K, lam, rho, iters, sweeps, seed = 6, 0.5, 1.0, 30, 4, 3
    D0 = init_dictionary(Y, K, seed).D[:, :, 0]

    dictionary, X, report = train(
        Y, K, lam, sweeps, seed,
        rho=rho,
        tol=1e-14,
        max_iters=iters,
        min_improvement=None,
        full_svd=True,
    )
    D_ref, X_ref, errors = matrix_ksvd(Y[:, :, 0], D0, lam, rho, iters, sweeps)

    np.testing.assert_allclose(report.representation_errors, errors, rtol=1e-6)
    np.testing.assert_allclose(dictionary.D[:, :, 0], D_ref, atol=1e-6)
    np.testing.assert_allclose(X[:, :, 0], X_ref, atol=1e-6)


@pytest.mark.slow
def test_planted_model_is_learned():
    model = planted_model(16, 32, 4, 512, 3, seed=3)
    _, _, report = train(model.Y, 32, 0.02, sweeps=20, seed=3, min_improvement=None)
    assert report.representation_errors[-1] <= 0.05 * fro_norm(model.Y)
    assert report.representation_errors[-1] < report.coding_errors[0]
