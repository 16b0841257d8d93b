"""
Tensor SVD (t-SVD), tubal rank and tubal-rank truncation.

Every decomposition works slice by slice in the Fourier domain. Only the
first n3 // 2 + 1 slices are decomposed; the rest are filled by conjugation
so that the factors come back real after the inverse FFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from tdict.errors import DecompositionError, RankOutOfRange
from tdict.tcore import (
    as_tensor3,
    half_spectrum,
    ifft_mode3,
    is_self_conjugate,
    mirror_spectrum,
    tprod,
    ttranspose,
)


@dataclass
class TSvdFactors:
    """M = U * S * V^T with t-orthogonal U, V and f-diagonal S.

    spectrum holds the singular values of every Fourier slice, shape
    (n3, min(n1, n2)), each row non-increasing.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    spectrum: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.U.shape[0], self.V.shape[0], self.U.shape[2]

    def singular_tubes(self) -> np.ndarray:
        """Diagonal tubes S(i, i, :) as rows of an (r, n3) array."""
        r = min(self.U.shape[0], self.V.shape[0])
        idx = np.arange(r)
        return self.S[idx, idx, :]


@dataclass
class Rank1Triplet:
    """Leading tubal triplet: u (n1 x 1 x n3), s (tube), v (n2 x 1 x n3)."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    iterations: int
    converged: bool

    def reconstruct(self) -> np.ndarray:
        n3 = self.s.shape[0]
        return tprod(tprod(self.u, self.s.reshape(1, 1, n3)), ttranspose(self.v))


def canonical_phases(u: np.ndarray) -> np.ndarray:
    """Unit-modulus factors making the largest-magnitude entry of each column real positive."""
    idx = np.argmax(np.abs(u), axis=0)
    lead = u[idx, np.arange(u.shape[1])]
    mag = np.abs(lead)
    phase = np.ones_like(lead)
    nz = mag > 0
    phase[nz] = lead[nz] / mag[nz]
    return phase


def _slice_svd(block: np.ndarray, real: bool):
    try:
        if real:
            return scipy.linalg.svd(block.real, full_matrices=True, lapack_driver="gesdd")
        return scipy.linalg.svd(block, full_matrices=True, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        pass
    try:
        # gesdd occasionally fails to converge where gesvd does not
        if real:
            return scipy.linalg.svd(block.real, full_matrices=True, lapack_driver="gesvd")
        return scipy.linalg.svd(block, full_matrices=True, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DecompositionError(f"Matrix SVD failed: {e}") from e


def tsvd(M: np.ndarray) -> TSvdFactors:
    M = as_tensor3(M, "M")
    n1, n2, n3 = M.shape
    r = min(n1, n2)
    M_hat = np.fft.fft(M, axis=2)

    U_hat = np.zeros((n1, n1, n3), dtype=complex)
    S_hat = np.zeros((n1, n2, n3), dtype=complex)
    V_hat = np.zeros((n2, n2, n3), dtype=complex)
    spectrum = np.zeros((n3, r))

    diag = np.arange(r)
    for i in range(half_spectrum(n3)):
        u, s, vh = _slice_svd(M_hat[:, :, i], is_self_conjugate(i, n3))
        u = u.astype(complex)
        v = np.conj(vh).T.astype(complex)

        # u_j s_j v_j^H is unchanged when u_j and v_j share a phase
        phase = canonical_phases(u)
        u = u / phase
        v[:, :r] = v[:, :r] / phase[:r]
        if n2 > r:
            tail = canonical_phases(v[:, r:])
            v[:, r:] = v[:, r:] / tail

        U_hat[:, :, i] = u
        V_hat[:, :, i] = v
        S_hat[diag, diag, i] = s
        spectrum[i] = s

    for F_hat in (U_hat, S_hat, V_hat):
        mirror_spectrum(F_hat)
    for i in range(1, n3 - half_spectrum(n3) + 1):
        spectrum[n3 - i] = spectrum[i]

    return TSvdFactors(
        U=ifft_mode3(U_hat),
        S=ifft_mode3(S_hat),
        V=ifft_mode3(V_hat),
        spectrum=spectrum,
    )


def truncate(F: TSvdFactors, k: int) -> np.ndarray:
    """Best tubal-rank-k approximation M_k = sum_{i<k} U(:,i,:) * S(i,i,:) * V(:,i,:)^T."""
    n1, n2, _ = F.shape
    if not 1 <= k <= min(n1, n2):
        raise RankOutOfRange(f"k must lie in [1, {min(n1, n2)}], got {k}")
    US = tprod(F.U[:, :k, :], F.S[:k, :k, :])
    return tprod(US, ttranspose(F.V[:, :k, :]))


def tubal_rank(M: np.ndarray, tol: float = 1e-8) -> int:
    """Number of diagonal tubes of S whose norm exceeds tol times the leading one."""
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    F = tsvd(M)
    norms = np.linalg.norm(F.singular_tubes(), axis=1)
    if norms.size == 0 or norms[0] == 0:
        return 0
    return int(np.count_nonzero(norms > tol * norms[0]))


def tubal_rank1_approx(
    M: np.ndarray,
    iters: int = 100,
    rng: np.random.Generator | None = None,
    start: np.ndarray | None = None,
    tol: float = 1e-10,
) -> Rank1Triplet:
    """Leading tubal triplet by power iteration in each Fourier slice.

    The left vector of each slice starts from `start` (an n1 x 1 x n3 tensor,
    e.g. the current atom) when it is nonzero in that slice, otherwise from a
    random vector drawn from `rng`. Iteration stops when successive Rayleigh
    quotients differ by less than `tol` relative; the best iterate is returned
    either way and `converged` reports whether every slice met the criterion.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    M = as_tensor3(M, "M")
    n1, n2, n3 = M.shape
    rng = rng if rng is not None else np.random.default_rng(0)
    M_hat = np.fft.fft(M, axis=2)
    start_hat = None if start is None else np.fft.fft(np.asarray(start).reshape(n1, 1, n3), axis=2)

    u_hat = np.zeros((n1, 1, n3), dtype=complex)
    v_hat = np.zeros((n2, 1, n3), dtype=complex)
    s_hat = np.zeros(n3)
    sweeps = 0
    converged = True

    for i in range(half_spectrum(n3)):
        A = M_hat[:, :, i]
        real = is_self_conjugate(i, n3)
        if real:
            A = A.real

        u = None
        if start_hat is not None:
            u0 = start_hat[:, 0, i]
            if real:
                u0 = u0.real
            if np.linalg.norm(u0) > 0:
                u = u0 / np.linalg.norm(u0)
        if u is None:
            u = rng.standard_normal(n1)
            if not real:
                u = u + 1j * rng.standard_normal(n1)
            u = u / np.linalg.norm(u)

        w = np.conj(A).T @ u
        sigma = np.linalg.norm(w)
        best_u, best_w, best_sigma = u, w, sigma
        slice_ok = sigma == 0
        for it in range(1, iters + 1):
            if sigma == 0:
                break
            z = A @ w
            nz = np.linalg.norm(z)
            if nz == 0:
                break
            u = z / nz
            w = np.conj(A).T @ u
            prev, sigma = sigma, np.linalg.norm(w)
            if sigma > best_sigma:
                best_u, best_w, best_sigma = u, w, sigma
            sweeps = max(sweeps, it)
            if abs(sigma - prev) < tol * sigma:
                slice_ok = True
                break
        converged = converged and slice_ok

        u = np.asarray(best_u, dtype=complex)
        if best_sigma > 0:
            v = np.asarray(best_w, dtype=complex) / best_sigma
        else:
            # Zero slice: any unit u keeps the atom normalized
            u = np.zeros(n1, dtype=complex)
            u[0] = 1.0
            v = np.zeros(n2, dtype=complex)
        phase = canonical_phases(u.reshape(n1, 1))[0]
        u_hat[:, 0, i] = u / phase
        v_hat[:, 0, i] = v / phase
        s_hat[i] = best_sigma

    mirror_spectrum(u_hat)
    mirror_spectrum(v_hat)
    for i in range(1, n3 - half_spectrum(n3) + 1):
        s_hat[n3 - i] = s_hat[i]

    s = ifft_mode3(s_hat.reshape(1, 1, n3).astype(complex)).reshape(n3)
    return Rank1Triplet(
        u=ifft_mode3(u_hat),
        s=s,
        v=ifft_mode3(v_hat),
        iterations=sweeps,
        converged=converged,
    )
