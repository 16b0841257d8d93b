"""
Image stacks and videos as tensor-column training sets.

A volume is an (H, W, B) float array of 8-bit-range values (height, width,
band or frame). A p x q x depth block at anchor (row, col, band) becomes a
tensor column of size (p*q) x 1 x depth: pixels are vectorized column-major
within each band (row index r0 + c0 * p) and the band axis stays mode 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdict.errors import InvalidTensor, PatchTooLarge, ShapeMismatch

PIXEL_MAX = 255.0


@dataclass
class PatchSet:
    """Vectorized patches with their anchors.

    positions has one (row, col, band) anchor per column of Y.
    """

    p: int
    q: int
    depth: int
    stride: tuple[int, int]
    positions: np.ndarray
    Y: np.ndarray
    volume_shape: tuple[int, int, int]

    @property
    def count(self) -> int:
        return self.Y.shape[1]

    def row_masks(self, mask: np.ndarray) -> np.ndarray:
        """Per-patch observed rows (count x p*q) from an H x W pixel mask."""
        mask = np.asarray(mask, dtype=bool)
        out = np.empty((self.count, self.p * self.q), dtype=bool)
        for j, (r, c, _) in enumerate(self.positions):
            out[j] = mask[r:r + self.p, c:c + self.q].ravel(order="F")
        return out


def as_volume(V, name: str = "volume") -> np.ndarray:
    arr = np.asarray(V, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidTensor(f"{name} must be H x W x B, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidTensor(f"{name} contains NaN or Inf")
    return arr


def frame_window(V: np.ndarray, start: int, stop: int | None = None) -> np.ndarray:
    """Bands/frames start..stop-1 of a volume."""
    V = as_volume(V)
    stop = V.shape[2] if stop is None else stop
    if not 0 <= start < stop <= V.shape[2]:
        raise ShapeMismatch(f"Frame window [{start}, {stop}) outside 0..{V.shape[2]}")
    return np.ascontiguousarray(V[:, :, start:stop])


def _grid_anchors(size: int, patch: int, stride: int, cover_edges: bool) -> list[int]:
    anchors = list(range(0, size - patch + 1, stride))
    if cover_edges and anchors[-1] + patch < size:
        anchors.append(size - patch)
    return anchors


def _as_pair(stride) -> tuple[int, int]:
    if np.isscalar(stride):
        return int(stride), int(stride)
    sr, sc = stride
    return int(sr), int(sc)


def extract_patches(
    V: np.ndarray,
    p: int,
    q: int,
    stride=1,
    mode: str = "grid",
    count: int | None = None,
    rng: np.random.Generator | None = None,
    depth: int | None = None,
    cover_edges: bool = True,
) -> PatchSet:
    """Cut a volume into p x q x depth patches.

    mode "grid" tiles rows and columns with the given stride (stride = p, q
    gives disjoint blocks) and bands in windows of `depth`; mode "random"
    draws `count` anchors uniformly, including the band anchor when depth is
    smaller than the band count.

    Args:
        V: H x W x B volume (2-D input is one band).
        p, q: Patch height and width.
        stride: Grid step, an int or a (row, col) pair.
        mode: "grid" or "random".
        count: Number of random patches (random mode only).
        rng: Generator for random anchors.
        depth: Bands per patch; None uses all bands.
        cover_edges: Add a last grid anchor flush with the far edge.
    """
    V = as_volume(V)
    H, W, B = V.shape
    depth = B if depth is None else int(depth)
    if p < 1 or q < 1 or depth < 1:
        raise PatchTooLarge(f"Patch dimensions must be positive, got {p} x {q} x {depth}")
    if p > H or q > W or depth > B:
        raise PatchTooLarge(f"Patch {p} x {q} x {depth} does not fit volume {H} x {W} x {B}")
    sr, sc = _as_pair(stride)

    if mode == "grid":
        if sr < 1 or sc < 1:
            raise ValueError(f"Grid stride must be >= 1, got {stride}")
        rows = _grid_anchors(H, p, sr, cover_edges)
        cols = _grid_anchors(W, q, sc, cover_edges)
        bands = _grid_anchors(B, depth, depth, True)
        positions = np.array(
            [(r, c, b) for b in bands for c in cols for r in rows], dtype=np.int64
        )
    elif mode == "random":
        if count is None or count < 1:
            raise ValueError("Random mode needs a positive patch count")
        if rng is None:
            raise ValueError("Random mode needs a seeded generator")
        positions = np.column_stack(
            [
                rng.integers(0, H - p + 1, size=count),
                rng.integers(0, W - q + 1, size=count),
                rng.integers(0, B - depth + 1, size=count),
            ]
        ).astype(np.int64)
    else:
        raise ValueError(f"Unknown patch mode: {mode}")

    Y = np.empty((p * q, len(positions), depth))
    for j, (r, c, b) in enumerate(positions):
        Y[:, j, :] = V[r:r + p, c:c + q, b:b + depth].reshape(p * q, depth, order="F")

    return PatchSet(
        p=p,
        q=q,
        depth=depth,
        stride=(sr, sc),
        positions=positions,
        Y=Y,
        volume_shape=(H, W, B),
    )


def reconstruct(
    patches: PatchSet,
    denoised: np.ndarray,
    reference: np.ndarray,
    beta: float = 0.0,
) -> np.ndarray:
    """Overlap-average patches back into a volume, relaxed toward `reference`.

    voxel = (beta * reference + sum of patch values) / (beta + overlap count);
    voxels no patch covers keep the reference value. Output is clamped to the
    pixel range.
    """
    denoised = np.asarray(denoised, dtype=np.float64)
    reference = as_volume(reference, "reference")
    if denoised.shape != patches.Y.shape:
        raise ShapeMismatch(f"Patch values {denoised.shape} do not match {patches.Y.shape}")
    if reference.shape != tuple(patches.volume_shape):
        raise ShapeMismatch(
            f"Reference {reference.shape} does not match volume {patches.volume_shape}"
        )
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")

    p, q, depth = patches.p, patches.q, patches.depth
    total = np.zeros_like(reference)
    weight = np.zeros_like(reference)
    for j, (r, c, b) in enumerate(patches.positions):
        total[r:r + p, c:c + q, b:b + depth] += denoised[:, j, :].reshape(p, q, depth, order="F")
        weight[r:r + p, c:c + q, b:b + depth] += 1.0

    out = reference.copy()
    covered = weight > 0
    out[covered] = (beta * reference[covered] + total[covered]) / (beta + weight[covered])
    return np.clip(out, 0.0, PIXEL_MAX)


def center_columns(
    Y: np.ndarray, row_masks: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the per-band mean of every column; returns (centered, means).

    With row_masks (columns x rows), means use observed rows only and
    unobserved rows are left at zero.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if row_masks is None:
        means = Y.mean(axis=0, keepdims=True)
        return Y - means, means
    w = np.asarray(row_masks, dtype=np.float64).T[:, :, None]
    counts = np.maximum(w.sum(axis=0, keepdims=True), 1.0)
    means = (Y * w).sum(axis=0, keepdims=True) / counts
    return (Y - means) * w, means


def restore_columns(Yc: np.ndarray, means: np.ndarray) -> np.ndarray:
    return np.asarray(Yc) + means


def add_fixed_location_noise(
    V: np.ndarray,
    sparsity: float,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian noise on a fixed random set of pixel sites, in every band.

    Returns the noisy volume (not clamped) and an H x W mask that is True at
    corrupted sites.
    """
    V = as_volume(V)
    if not 0 <= sparsity <= 1:
        raise ValueError(f"sparsity must lie in [0, 1], got {sparsity}")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    H, W, B = V.shape
    n_sites = int(np.floor(sparsity * H * W))
    sites = rng.choice(H * W, size=n_sites, replace=False)
    rows, cols = np.unravel_index(sites, (H, W))

    noisy = V.copy()
    noisy[rows, cols, :] += rng.normal(0.0, sigma, size=(n_sites, B))
    corrupted = np.zeros((H, W), dtype=bool)
    corrupted[rows, cols] = True
    return noisy, corrupted


def apply_dead_pixels(
    V: np.ndarray,
    missing_fraction: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero whole tubes at a random fraction of pixel sites.

    Returns the damaged volume and the H x W mask of surviving (observed) sites.
    Dead sites are a prefix of one random permutation, so generators in the
    same state give nested masks for increasing fractions.
    """
    V = as_volume(V)
    if not 0 <= missing_fraction <= 1:
        raise ValueError(f"missing_fraction must lie in [0, 1], got {missing_fraction}")
    H, W, _ = V.shape
    n_dead = int(np.floor(missing_fraction * H * W))
    sites = rng.permutation(H * W)[:n_dead]
    rows, cols = np.unravel_index(sites, (H, W))

    damaged = V.copy()
    damaged[rows, cols, :] = 0.0
    observed = np.ones((H, W), dtype=bool)
    observed[rows, cols] = False
    return damaged, observed


def _check_same_shape(X: np.ndarray, Xrec: np.ndarray) -> None:
    if X.shape != Xrec.shape:
        raise ShapeMismatch(f"Volumes differ in shape: {X.shape} vs {Xrec.shape}")


def reconstruction_error(X: np.ndarray, Xrec: np.ndarray) -> float:
    """RE = sqrt(||X - Xrec||_F^2 / N), N the number of voxels."""
    X, Xrec = as_volume(X), as_volume(Xrec)
    _check_same_shape(X, Xrec)
    return float(np.sqrt(np.mean((X - Xrec) ** 2)))


def psnr(X: np.ndarray, Xrec: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit-range data; inf when identical."""
    X, Xrec = as_volume(X), as_volume(Xrec)
    _check_same_shape(X, Xrec)
    mse = np.mean((X - Xrec) ** 2)
    if mse == 0:
        return float("inf")
    return float(10 * np.log10(PIXEL_MAX**2 / mse))
