import numpy as np
import pytest

from tdict.errors import ShapeMismatch
from tdict.ktsvd import Dictionary, train
from tdict.restore import (
    CodingSettings,
    code_columns,
    complete_volume,
    default_beta,
    default_lambda,
    denoise_volume,
    training_columns,
)
from tdict.synth import planted_volume


@pytest.fixture(scope="module")
def learned():
    """A small dictionary learned from a planted 16 x 16 x 4 volume."""
    V, _ = planted_volume(16, 16, 4, 4, 4, K=8, T=2, seed=0)
    Y = training_columns(V, 4, 4, stride=1, center=True, scale=255.0)
    dictionary, _, _ = train(Y, 12, 0.05, sweeps=3, seed=0)
    dictionary.p, dictionary.q = 4, 4
    dictionary.center, dictionary.scale = True, 255.0
    return V, dictionary


def test_defaults():
    assert default_lambda(4) == pytest.approx(0.1)
    assert default_beta(100.0) == pytest.approx(0.3)
    assert default_beta(None) == 0.5
    assert default_beta(0.0) == 0.5


def test_code_columns_independent_of_workers(rng):
    D = rng.standard_normal((6, 5, 3))
    Y = rng.standard_normal((6, 23, 3))
    one = code_columns(Y, D, CodingSettings(lam=0.2, workers=1, chunk=7))
    four = code_columns(Y, D, CodingSettings(lam=0.2, workers=4, chunk=7))
    np.testing.assert_array_equal(one[0], four[0])
    assert one[1] == four[1] == 4


def test_training_columns(rng):
    V = rng.uniform(0, 255, size=(10, 10, 3))
    Y = training_columns(V, 4, 4, stride=2)
    assert Y.shape == (16, 16, 3)
    np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-12)

    mask = np.ones((10, 10), dtype=bool)
    mask[0, 0] = False
    kept = training_columns(V, 4, 4, stride=2, mask=mask)
    assert kept.shape[1] == 15


def test_complete_without_missing_data_is_identity(learned):
    V, dictionary = learned
    out, report = complete_volume(V, np.ones(V.shape[:2], dtype=bool), dictionary, CodingSettings(lam=0.05))
    np.testing.assert_array_equal(out, V)
    assert report.coded == 0


def test_complete_fills_missing_tubes(learned):
    V, dictionary = learned
    damaged = V.copy()
    mask = np.ones(V.shape[:2], dtype=bool)
    mask[2:6, 3:9] = False
    # A whole 4 x 4 block with no observed pixel
    mask[12:16, 12:16] = False
    damaged[~mask] = 0.0

    out, report = complete_volume(damaged, mask, dictionary, CodingSettings(lam=0.05))
    np.testing.assert_array_equal(out[mask], V[mask])
    assert report.empty_patches == 1
    np.testing.assert_allclose(out[13, 13], V[mask].mean(axis=0))
    err_out = np.sqrt(np.mean((out - V)[~mask] ** 2))
    err_zero = np.sqrt(np.mean((damaged - V)[~mask] ** 2))
    assert err_out < 0.5 * err_zero


def test_complete_checks_geometry(learned):
    V, dictionary = learned
    with pytest.raises(ShapeMismatch):
        complete_volume(V, np.ones((3, 3), dtype=bool), dictionary, CodingSettings(lam=0.05))
    bare = Dictionary(D=dictionary.D)
    with pytest.raises(ShapeMismatch):
        complete_volume(V, np.ones(V.shape[:2], dtype=bool), bare, CodingSettings(lam=0.05))
    with pytest.raises(ShapeMismatch):
        denoise_volume(V[:, :, :2], dictionary, CodingSettings(lam=0.05), beta=0.5)


def test_denoise_shapes_and_relaxation(learned):
    V, dictionary = learned
    out, report = denoise_volume(V, dictionary, CodingSettings(lam=0.05), beta=0.5, stride=2)
    assert out.shape == V.shape
    assert report.coded == report.patches == 49
    assert out.min() >= 0.0 and out.max() <= 255.0

    held, _ = denoise_volume(V, dictionary, CodingSettings(lam=0.05), beta=1e12, stride=2)
    np.testing.assert_allclose(held, V, atol=1e-6)
