"""
Planted tubal-sparse models for experiments and tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdict.errors import InvalidTensor
from tdict.patches import PIXEL_MAX
from tdict.seeding import stream
from tdict.tcore import tprod


@dataclass
class PlantedModel:
    D: np.ndarray  # d x K x n3, unit-norm atoms
    X: np.ndarray  # K x n x n3, T nonzero tubes per column
    Y: np.ndarray  # D * X
    support: np.ndarray  # n x T atom indices, sorted per column


def random_dictionary(d: int, K: int, n3: int, rng: np.random.Generator) -> np.ndarray:
    D = rng.standard_normal((d, K, n3))
    return D / np.sqrt(np.sum(D * D, axis=(0, 2)))[None, :, None]


def planted_model(
    d: int,
    K: int,
    n3: int,
    n: int,
    T: int,
    seed: int,
    coeff_range: tuple[float, float] = (1.0, 2.0),
) -> PlantedModel:
    """Random unit-atom dictionary, a code with T nonzero tubes per column and Y = D * X.

    Nonzero tubes have random directions and norms uniform in coeff_range.
    """
    if min(d, K, n3, n) < 1:
        raise InvalidTensor(f"Planted model needs positive sizes, got d={d} K={K} n3={n3} n={n}")
    if not 0 <= T <= K:
        raise ValueError(f"T must lie in [0, K], got {T}")
    rng = stream(seed, "synth")
    D = random_dictionary(d, K, n3, rng)

    X = np.zeros((K, n, n3))
    support = np.zeros((n, T), dtype=np.int64)
    lo, hi = coeff_range
    for j in range(n):
        atoms = np.sort(rng.choice(K, size=T, replace=False))
        support[j] = atoms
        tubes = rng.standard_normal((T, n3))
        tubes /= np.linalg.norm(tubes, axis=1, keepdims=True)
        X[atoms, j, :] = tubes * rng.uniform(lo, hi, size=(T, 1))

    return PlantedModel(D=D, X=X, Y=tprod(D, X), support=support)


def _block_volume(height, width, bands, p, q, K, T, seed):
    if height % p or width % q:
        raise InvalidTensor(f"Volume {height} x {width} is not tiled by {p} x {q} blocks")
    rows, cols = height // p, width // q
    model = planted_model(p * q, K, bands, rows * cols, T, seed)

    V = np.empty((height, width, bands))
    j = 0
    for c in range(cols):
        for r in range(rows):
            V[r * p:(r + 1) * p, c * q:(c + 1) * q, :] = model.Y[:, j, :].reshape(p, q, bands, order="F")
            j += 1
    return V, model.D


def _wave_volume(height, width, bands, p, q, T, seed):
    rng = stream(seed, "synth")
    theta = rng.uniform(0.0, np.pi, size=T)
    omega = 2.0 * np.pi / rng.uniform(6.0, 24.0, size=T)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=T)
    tubes = 1.0 + 0.5 * rng.uniform(-1.0, 1.0, size=(T, bands))

    r, c = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    i, j = np.meshgrid(np.arange(p), np.arange(q), indexing="ij")
    V = np.zeros((height, width, bands))
    # Atoms carry their whole tube in slice 0
    D = np.zeros((p * q, 2 * T, bands))
    for m in range(T):
        direction = (np.cos(theta[m]), np.sin(theta[m]))
        wave = np.cos(omega[m] * (r * direction[0] + c * direction[1]) + phase[m])
        V += wave[:, :, None] * tubes[m]
        local = omega[m] * (i * direction[0] + j * direction[1])
        D[:, 2 * m, 0] = np.cos(local).ravel(order="F")
        D[:, 2 * m + 1, 0] = np.sin(local).ravel(order="F")
    norms = np.sqrt(np.sum(D * D, axis=(0, 2)))
    D /= np.where(norms > 0, norms, 1.0)[None, :, None]
    return V, D


def planted_volume(
    height: int,
    width: int,
    bands: int,
    p: int,
    q: int,
    K: int,
    T: int,
    seed: int,
    pattern: str = "blocks",
) -> tuple[np.ndarray, np.ndarray]:
    """An 8-bit-range planted volume and its dictionary.

    pattern="blocks" tiles disjoint p x q blocks, each a T-sparse combination
    of K random atoms; height and width must be multiples of p and q.

    pattern="waves" sums T plane waves, each with its own direction, period in
    [6, 24] pixels, phase and band profile. Every p x q window at any offset is
    then a combination of the 2T windowed cosine and sine atoms with tubes in
    slice 0, so shifted patches stay sparse. K is not used.

    Returns (volume, dictionary) with the volume scaled to 128 + 40 * V / std(V)
    and clipped to the pixel range.
    """
    if pattern == "blocks":
        V, D = _block_volume(height, width, bands, p, q, K, T, seed)
    elif pattern == "waves":
        if min(height, width, bands, p, q) < 1:
            raise InvalidTensor(f"Planted volume needs positive sizes, got {height} x {width} x {bands}")
        if T < 0:
            raise ValueError(f"T must be non-negative, got {T}")
        V, D = _wave_volume(height, width, bands, p, q, T, seed)
    else:
        raise ValueError(f"Unknown planted pattern: {pattern}")

    scale = V.std()
    normalized = V / scale if scale > 0 else V
    return np.clip(128.0 + 40.0 * normalized, 0.0, PIXEL_MAX), D
