"""
Third-order tensors and the t-product algebra.

Tensors are plain float64 ndarrays of shape (n1, n2, n3). Mode 3 (the last
axis) is the tube direction; frontal slices are A[:, :, k], tubes A[i, j, :]
and tensor columns A[:, j:j+1, :].

The t-product is computed in the Fourier domain: an FFT along mode 3 turns
circular convolution of tubes into independent matrix products, one per
Fourier slice. FFT convention: unnormalized forward, 1/n3-scaled inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdict.errors import DimensionMismatch, InvalidTensor, SymmetryViolation

# Imaginary residue allowed after an inverse FFT, relative to (1 + output norm)
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class FTensor3:
    """A tensor transformed along mode 3.

    real_origin marks spectra of real tensors: slice i and slice n3 - i are
    complex conjugates, so the inverse transform is real.
    """

    data: np.ndarray
    real_origin: bool = True

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def slices(self) -> np.ndarray:
        """Fourier slices as an (n3, n1, n2) view."""
        return np.moveaxis(self.data, 2, 0)


def as_tensor3(A, name: str = "tensor") -> np.ndarray:
    """Validate and convert to a float64 third-order array."""
    arr = np.asarray(A, dtype=np.float64)
    if arr.ndim != 3:
        raise InvalidTensor(f"{name} must be third-order, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise InvalidTensor(f"{name} has an empty dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidTensor(f"{name} contains NaN or Inf")
    return arr


def half_spectrum(n3: int) -> int:
    """Number of Fourier slices that determine a real tensor's spectrum."""
    return n3 // 2 + 1


def is_self_conjugate(i: int, n3: int) -> bool:
    """True for Fourier slices that are real for real input (DC and Nyquist)."""
    return i == 0 or (n3 % 2 == 0 and i == n3 // 2)


def mirror_spectrum(F: np.ndarray) -> np.ndarray:
    """Fill slices past the half spectrum by conjugating their partners, in place."""
    n3 = F.shape[2]
    for i in range(1, n3 - half_spectrum(n3) + 1):
        F[:, :, n3 - i] = np.conj(F[:, :, i])
    return F


def fft_mode3(A: np.ndarray) -> FTensor3:
    A = as_tensor3(A)
    return FTensor3(np.fft.fft(A, axis=2), real_origin=True)


def ifft_mode3(F: FTensor3 | np.ndarray) -> np.ndarray:
    """Inverse transform, discarding an imaginary residue that must be negligible."""
    data = F.data if isinstance(F, FTensor3) else np.asarray(F)
    out = np.fft.ifft(data, axis=2)
    real = np.ascontiguousarray(out.real)
    residue = np.linalg.norm(out.imag)
    if residue > IMAG_TOL * (1.0 + np.linalg.norm(real)):
        raise SymmetryViolation(
            f"Inverse FFT imaginary residue {residue:.3e} exceeds tolerance; "
            "spectrum is not conjugate-symmetric"
        )
    return real


def slice_product(Fa: np.ndarray, Fb: np.ndarray) -> np.ndarray:
    """Per-Fourier-slice matrix product of two (n1, n2, n3) spectra."""
    out = np.matmul(np.moveaxis(Fa, 2, 0), np.moveaxis(Fb, 2, 0))
    return np.moveaxis(out, 0, 2)


def slice_ctranspose(F: np.ndarray) -> np.ndarray:
    """Conjugate transpose of every Fourier slice."""
    return np.conj(np.swapaxes(F, 0, 1))


def _check_product_shapes(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[1] != B.shape[0] or A.shape[2] != B.shape[2]:
        raise DimensionMismatch(
            f"Cannot t-multiply {A.shape} by {B.shape}: "
            "inner dimension and tube length must match"
        )


def tprod(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """t-product C = A * B of (n1, n2, n3) and (n2, n4, n3) tensors."""
    A = as_tensor3(A, "A")
    B = as_tensor3(B, "B")
    _check_product_shapes(A, B)
    C_hat = slice_product(np.fft.fft(A, axis=2), np.fft.fft(B, axis=2))
    return ifft_mode3(C_hat)


def ttranspose(A: np.ndarray) -> np.ndarray:
    """Transpose every frontal slice and reverse the order of slices 2..n3."""
    A = np.asarray(A)
    n3 = A.shape[2]
    order = (-np.arange(n3)) % n3
    return np.ascontiguousarray(np.swapaxes(A, 0, 1)[:, :, order])


def identity_tensor(n: int, n3: int) -> np.ndarray:
    if n < 1 or n3 < 1:
        raise InvalidTensor(f"Identity tensor needs n, n3 >= 1, got {n}, {n3}")
    eye = np.zeros((n, n, n3))
    eye[:, :, 0] = np.eye(n)
    return eye


def tube_norms(A: np.ndarray) -> np.ndarray:
    """Euclidean norm of every tube, as an (n1, n2) matrix."""
    return np.linalg.norm(np.asarray(A), axis=2)


def l112_norm(A: np.ndarray) -> float:
    """Sum of tube norms: the convex surrogate of tubal sparsity."""
    return float(tube_norms(A).sum())


def fro_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(A).ravel()))


def fro_norm_complex(F: FTensor3 | np.ndarray) -> float:
    data = F.data if isinstance(F, FTensor3) else np.asarray(F)
    return float(np.linalg.norm(data.ravel()))


# Block-circulant view of the t-product (spatial reference for the FFT path)


def unfold(A: np.ndarray) -> np.ndarray:
    """Stack frontal slices vertically: (n1 * n3, n2)."""
    A = np.asarray(A)
    n1, n2, n3 = A.shape
    return np.moveaxis(A, 2, 0).reshape(n3 * n1, n2)


def fold(M: np.ndarray, n1: int, n2: int, n3: int) -> np.ndarray:
    """Inverse of unfold."""
    return np.ascontiguousarray(np.moveaxis(np.asarray(M).reshape(n3, n1, n2), 0, 2))


def bcirc(A: np.ndarray) -> np.ndarray:
    """Block-circulant matrix (n1 * n3, n2 * n3) whose block (i, j) is A^(i - j mod n3)."""
    A = np.asarray(A)
    n1, n2, n3 = A.shape
    out = np.empty((n1 * n3, n2 * n3), dtype=A.dtype)
    for i in range(n3):
        for j in range(n3):
            out[i * n1:(i + 1) * n1, j * n2:(j + 1) * n2] = A[:, :, (i - j) % n3]
    return out


def tprod_circulant(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """t-product by its definition, fold(bcirc(A) @ unfold(B))."""
    A = as_tensor3(A, "A")
    B = as_tensor3(B, "B")
    _check_product_shapes(A, B)
    return fold(bcirc(A) @ unfold(B), A.shape[0], B.shape[1], A.shape[2])
