"""
Tubal-sparse coding.

Solves  min_X ||Y - D * X||_F^2 + lam * ||X||_{1,1,2}  by ADMM with the
splitting X = Z:

    X <- argmin ||Y - D * X||^2 + <Q, X> + rho/2 ||X - Z||^2
    Z <- tube_shrink(X + Q / rho, lam / rho)
    Q <- Q + rho (X - Z)

The X-update is a regularized least-squares solve that decouples over
Fourier slices: (2 D^H D + rho I) X = 2 D^H Y - Q + rho Z per slice. The
Cholesky factors depend only on D and rho, so they are computed once per
call and reused every iteration.

The masked variant restricts the data term to observed row-tubes. The mask
is constant along mode 3, so restricting rows commutes with the FFT and the
masked problem is the plain problem on the observed rows of Y and D.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from tdict.errors import DimensionMismatch, EmptyMask, SingularSystem
from tdict.tcore import (
    as_tensor3,
    half_spectrum,
    ifft_mode3,
    is_self_conjugate,
    l112_norm,
    mirror_spectrum,
    slice_ctranspose,
    slice_product,
    tprod,
)

DEFAULT_RHO = 1.0
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 200


@dataclass
class SparseCodeProblem:
    Y: np.ndarray
    D: np.ndarray
    lam: float
    rho: float = DEFAULT_RHO
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    mask: np.ndarray | None = None  # observed rows of Y and D

    def __post_init__(self):
        self.Y = as_tensor3(self.Y, "Y")
        self.D = as_tensor3(self.D, "D")
        d, _, n3 = self.Y.shape
        if self.D.shape[0] != d or self.D.shape[2] != n3:
            raise DimensionMismatch(
                f"Dictionary {self.D.shape} does not match data {self.Y.shape}"
            )
        if not self.lam > 0 or not self.rho > 0:
            raise ValueError(f"lam and rho must be positive, got {self.lam}, {self.rho}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool).ravel()
            if self.mask.shape[0] != d:
                raise DimensionMismatch(
                    f"Mask has {self.mask.shape[0]} rows, data has {d}"
                )


@dataclass
class SparseCodeResult:
    X: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    primal_residuals: list[float] = field(default_factory=list)
    dual_residuals: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    # l112 norm of the final shrink input X + Q / rho
    pre_shrink_l112: float = 0.0


def tube_shrink(C: np.ndarray, kappa: float) -> np.ndarray:
    """Proximal operator of kappa * ||.||_{1,1,2}: shrink every tube toward zero."""
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    C = np.asarray(C, dtype=np.float64)
    norms = np.linalg.norm(C, axis=2, keepdims=True)
    scale = np.zeros_like(norms)
    np.divide(kappa, norms, out=scale, where=norms > 0)
    scale = np.where(norms > 0, np.maximum(0.0, 1.0 - scale), 0.0)
    return C * scale


class SliceSolver:
    """Cached per-slice factorizations of 2 D^H D + rho I for the X-update."""

    def __init__(self, D: np.ndarray, Y: np.ndarray, rho: float):
        self.n3 = D.shape[2]
        self.K = D.shape[1]
        self.rho = rho
        D_hat = np.fft.fft(D, axis=2)
        Y_hat = np.fft.fft(Y, axis=2)
        Dh = slice_ctranspose(D_hat)
        self.D_hat = D_hat
        self.Y_hat = Y_hat
        # 2 D^H Y, fixed for the whole run
        self.rhs0 = 2.0 * slice_product(Dh, Y_hat)
        gram = slice_product(Dh, D_hat)

        self.factors = []
        for i in range(half_spectrum(self.n3)):
            G = 2.0 * gram[:, :, i] + rho * np.eye(self.K)
            if is_self_conjugate(i, self.n3):
                G = G.real
            if not np.all(np.isfinite(G)):
                raise SingularSystem("Normal equations contain NaN or Inf")
            try:
                self.factors.append(scipy.linalg.cho_factor(G, lower=True))
            except np.linalg.LinAlgError as e:
                raise SingularSystem(f"Cholesky failed on Fourier slice {i}: {e}") from e

    def solve(self, Z_hat: np.ndarray, Q_hat: np.ndarray) -> np.ndarray:
        """X-update in the Fourier domain; returns the full spectrum of X."""
        rhs = self.rhs0 - Q_hat + self.rho * Z_hat
        X_hat = np.zeros_like(rhs)
        for i, factor in enumerate(self.factors):
            b = rhs[:, :, i]
            if is_self_conjugate(i, self.n3):
                X_hat[:, :, i] = scipy.linalg.cho_solve(factor, b.real)
            else:
                X_hat[:, :, i] = scipy.linalg.cho_solve(factor, b)
        if not np.all(np.isfinite(X_hat)):
            raise SingularSystem("X-update produced NaN or Inf")
        return mirror_spectrum(X_hat)

    def data_misfit(self, X_hat: np.ndarray) -> float:
        """||Y - D * X||_F^2 evaluated from spectra (Parseval)."""
        R = self.Y_hat - slice_product(self.D_hat, X_hat)
        return float(np.vdot(R, R).real) / self.n3


def _observed(p: SparseCodeProblem) -> tuple[np.ndarray, np.ndarray]:
    if p.mask is None:
        return p.Y, p.D
    if not p.mask.any():
        raise EmptyMask("No observed rows in the coding problem")
    return p.Y[p.mask], p.D[p.mask]


def x_update(
    Y: np.ndarray,
    D: np.ndarray,
    Z: np.ndarray,
    Q: np.ndarray,
    rho: float,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """A single X-update, solved per Fourier slice."""
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        Y, D = Y[mask], D[mask]
    solver = SliceSolver(as_tensor3(D, "D"), as_tensor3(Y, "Y"), rho)
    X_hat = solver.solve(np.fft.fft(Z, axis=2), np.fft.fft(Q, axis=2))
    return ifft_mode3(X_hat)


def objective(
    Y: np.ndarray,
    D: np.ndarray,
    X: np.ndarray,
    lam: float,
    mask: np.ndarray | None = None,
) -> float:
    """||P(Y - D * X)||_F^2 + lam ||X||_{1,1,2}, P the row projector of mask."""
    R = np.asarray(Y) - tprod(D, X)
    if mask is not None:
        R = R[np.asarray(mask, dtype=bool).ravel()]
    return float(np.sum(R * R)) + lam * l112_norm(X)


def _admm(Y: np.ndarray, D: np.ndarray, p: SparseCodeProblem) -> SparseCodeResult:
    K = D.shape[1]
    _, n, n3 = Y.shape
    solver = SliceSolver(D, Y, p.rho)
    kappa = p.lam / p.rho
    threshold = p.tol * np.sqrt(K * n * n3)

    Z = np.zeros((K, n, n3))
    Z_hat = np.zeros((K, n, n3), dtype=complex)
    Q_hat = np.zeros((K, n, n3), dtype=complex)
    result = SparseCodeResult(X=Z)

    for it in range(1, p.max_iters + 1):
        X_hat = solver.solve(Z_hat, Q_hat)
        X = ifft_mode3(X_hat)
        Q = ifft_mode3(Q_hat)

        Z_prev = Z
        C = X + Q / p.rho
        Z = tube_shrink(C, kappa)
        Z_hat = np.fft.fft(Z, axis=2)
        Q_hat = Q_hat + p.rho * (X_hat - Z_hat)

        r = float(np.linalg.norm((X - Z).ravel()))
        s = float(p.rho * np.linalg.norm((Z - Z_prev).ravel()))
        result.primal_residuals.append(r)
        result.dual_residuals.append(s)
        result.objective_trace.append(solver.data_misfit(Z_hat) + p.lam * l112_norm(Z))
        result.iterations = it
        result.pre_shrink_l112 = l112_norm(C)

        if r <= threshold and s <= threshold:
            result.converged = True
            break

    result.X = Z
    return result


def sparse_code(p: SparseCodeProblem) -> SparseCodeResult:
    if p.mask is not None:
        raise ValueError("sparse_code does not take a mask; use masked_sparse_code")
    return _admm(p.Y, p.D, p)


def masked_sparse_code(p: SparseCodeProblem) -> SparseCodeResult:
    if p.mask is None:
        raise ValueError("masked_sparse_code needs a mask")
    Y, D = _observed(p)
    return _admm(Y, D, p)
