"""
Volume completion and denoising with a learned dictionary.

Patches are coded in fixed-size column chunks on a thread pool. Chunk
boundaries do not depend on the worker count and results are written back
by chunk index, so the output is identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from tdict.errors import ShapeMismatch
from tdict.ktsvd import Dictionary
from tdict.patches import (
    PatchSet,
    as_volume,
    center_columns,
    extract_patches,
    reconstruct,
    restore_columns,
)
from tdict.sparse import (
    DEFAULT_MAX_ITERS,
    DEFAULT_RHO,
    DEFAULT_TOL,
    SparseCodeProblem,
    masked_sparse_code,
    sparse_code,
)
from tdict.tcore import tprod


@dataclass
class CodingSettings:
    lam: float
    rho: float = DEFAULT_RHO
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    workers: int = 1
    chunk: int = 512


@dataclass
class RestoreReport:
    patches: int = 0
    coded: int = 0
    empty_patches: int = 0
    unconverged_chunks: int = 0
    chunks: int = 0


def default_lambda(n3: int) -> float:
    return 0.05 * np.sqrt(n3)


def default_beta(sigma: float | None) -> float:
    """Weight of the noisy reference in the overlap average."""
    if sigma:
        return 30.0 / sigma
    return 0.5


def code_columns(
    Y: np.ndarray,
    D: np.ndarray,
    settings: CodingSettings,
    mask: np.ndarray | None = None,
) -> tuple[np.ndarray, int, int]:
    """Tubal-sparse codes of all columns of Y; returns (X, chunks, unconverged chunks).

    Args:
        Y: d x n x n3 columns to code.
        D: d x K x n3 dictionary.
        settings: ADMM parameters, worker count and chunk size.
        mask: Observed rows shared by every column; None codes all rows.
    """
    n = Y.shape[1]
    K, n3 = D.shape[1], D.shape[2]
    X = np.zeros((K, n, n3))
    if n == 0:
        return X, 0, 0
    bounds = [(s, min(s + settings.chunk, n)) for s in range(0, n, settings.chunk)]

    def run(bound):
        lo, hi = bound
        problem = SparseCodeProblem(
            Y[:, lo:hi, :],
            D,
            settings.lam,
            rho=settings.rho,
            max_iters=settings.max_iters,
            tol=settings.tol,
            mask=mask,
        )
        if mask is None:
            return sparse_code(problem)
        return masked_sparse_code(problem)

    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        results = list(pool.map(run, bounds))

    unconverged = 0
    for (lo, hi), result in zip(bounds, results):
        X[:, lo:hi, :] = result.X
        unconverged += not result.converged
    return X, len(bounds), unconverged


def _check_geometry(V: np.ndarray, dictionary: Dictionary) -> tuple[int, int]:
    p, q = dictionary.p, dictionary.q
    if p is None or q is None:
        raise ShapeMismatch("Dictionary has no patch geometry; it was not learned from a volume")
    if p * q != dictionary.d:
        raise ShapeMismatch(f"Patch {p} x {q} does not match atom length {dictionary.d}")
    if V.shape[2] < dictionary.n3:
        raise ShapeMismatch(
            f"Volume has {V.shape[2]} bands, dictionary depth is {dictionary.n3}"
        )
    return p, q


def volume_patches(
    V: np.ndarray,
    dictionary: Dictionary,
    stride,
    cover_edges: bool = True,
) -> PatchSet:
    """Grid patches of V matching the dictionary's geometry, bands in windows of its depth."""
    p, q = _check_geometry(V, dictionary)
    return extract_patches(
        V, p, q, stride=stride, mode="grid", depth=dictionary.n3, cover_edges=cover_edges
    )


def training_columns(
    V: np.ndarray,
    p: int,
    q: int,
    stride=1,
    count: int | None = None,
    rng: np.random.Generator | None = None,
    depth: int | None = None,
    center: bool = True,
    scale: float = 255.0,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Training set from a volume: random patches when count is given, else a grid.

    Args:
        V: H x W x B volume.
        p, q: Patch height and width.
        stride: Grid step when count is None.
        count: Number of random patches.
        rng: Generator for random anchors.
        depth: Bands per patch; None uses all bands.
        center: Remove the per-band mean of every column.
        scale: Divide the data by this before centering.
        mask: H x W observed pixels; only fully observed patches are kept.
    """
    mode = "random" if count else "grid"
    patches = extract_patches(V, p, q, stride=stride, mode=mode, count=count, rng=rng, depth=depth)
    Y = patches.Y
    if mask is not None:
        keep = patches.row_masks(mask).all(axis=1)
        Y = Y[:, keep, :]
    Y = Y / scale
    if center:
        Y, _ = center_columns(Y)
    return np.ascontiguousarray(Y)


def _band_means(V: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.zeros(V.shape[2])
    return V[mask].mean(axis=0)


def complete_volume(
    V: np.ndarray,
    mask: np.ndarray,
    dictionary: Dictionary,
    settings: CodingSettings,
    stride=None,
) -> tuple[np.ndarray, RestoreReport]:
    """Fill unobserved pixel tubes of V (mask True = observed).

    Patches are grouped by their observed-row pattern and coded with the
    masked problem. Fully observed patches are kept as they are, patches
    with no observed pixel fall back to the per-band mean of the observed
    data, and observed voxels are copied from V into the result.
    """
    V = as_volume(V)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 3:
        mask = mask[:, :, 0]
    if mask.shape != V.shape[:2]:
        raise ShapeMismatch(f"Mask {mask.shape} does not match volume {V.shape[:2]}")
    stride = (dictionary.p, dictionary.q) if stride is None else stride

    patches = volume_patches(V, dictionary, stride)
    row_masks = patches.row_masks(mask)
    scale = dictionary.scale
    Ys = patches.Y / scale
    if dictionary.center:
        Yc, means = center_columns(Ys, row_masks)
    else:
        Yc, means = Ys * row_masks.T[:, :, None], np.zeros((1, Ys.shape[1], Ys.shape[2]))

    report = RestoreReport(patches=patches.count)
    restored = patches.Y.copy()
    fill = _band_means(V, mask)

    groups: dict[bytes, list[int]] = {}
    for j, rows in enumerate(row_masks):
        if rows.all():
            continue
        if not rows.any():
            b = patches.positions[j, 2]
            restored[:, j, :] = fill[b:b + patches.depth]
            report.empty_patches += 1
            continue
        groups.setdefault(np.packbits(rows).tobytes(), []).append(j)

    for key in sorted(groups):
        cols = np.array(groups[key])
        rows = row_masks[cols[0]]
        X, chunks, unconverged = code_columns(Yc[:, cols, :], dictionary.D, settings, mask=rows)
        recon = restore_columns(tprod(dictionary.D, X), means[:, cols, :])
        restored[:, cols, :] = recon * scale
        report.coded += cols.size
        report.chunks += chunks
        report.unconverged_chunks += unconverged

    out = reconstruct(patches, restored, V, beta=0.0)
    out[mask] = V[mask]
    return out, report


def denoise_volume(
    V: np.ndarray,
    dictionary: Dictionary,
    settings: CodingSettings,
    beta: float,
    stride=1,
) -> tuple[np.ndarray, RestoreReport]:
    """Code every overlapping patch and average back, relaxed toward the noisy input."""
    V = as_volume(V)
    patches = volume_patches(V, dictionary, stride)
    Ys = patches.Y / dictionary.scale
    if dictionary.center:
        Yc, means = center_columns(Ys)
    else:
        Yc, means = Ys, np.zeros((1, Ys.shape[1], Ys.shape[2]))

    X, chunks, unconverged = code_columns(Yc, dictionary.D, settings)
    recon = restore_columns(tprod(dictionary.D, X), means) * dictionary.scale
    report = RestoreReport(
        patches=patches.count,
        coded=patches.count,
        chunks=chunks,
        unconverged_chunks=unconverged,
    )
    return reconstruct(patches, recon, V, beta=beta), report
