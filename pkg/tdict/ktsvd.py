"""
K-TSVD dictionary learning.

Each sweep alternates two stages:

1. Tubal-sparse coding of all training columns against the current
   dictionary (ADMM, see tdict.sparse).
2. A sequential pass over the atoms. For atom k the representation error
   without that atom, restricted to the columns that use it, is replaced by
   its leading tubal-rank-1 term: the left factor becomes the new atom and
   the scaled right factor the new coefficient row.

Atoms that no column uses are replaced by the worst-represented training
column.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from tdict.errors import DimensionMismatch, InsufficientData, ShapeMismatch
from tdict.seeding import stream
from tdict.sparse import (
    DEFAULT_MAX_ITERS,
    DEFAULT_RHO,
    DEFAULT_TOL,
    SparseCodeProblem,
    sparse_code,
)
from tdict.tcore import as_tensor3, fro_norm, tprod, ttranspose, tube_norms
from tdict.tsvd import Rank1Triplet, tsvd, tubal_rank1_approx

POWER_ITERS = 100


@dataclass
class Dictionary:
    """Tensor dictionary D (d x K x n3) with unit-norm lateral slices as atoms."""

    D: np.ndarray
    seed: int | None = None
    sweeps: int = 0
    lam: float | None = None
    rho: float | None = None
    # patch geometry and preprocessing when learned from a volume
    p: int | None = None
    q: int | None = None
    center: bool = False
    scale: float = 1.0

    @property
    def d(self) -> int:
        return self.D.shape[0]

    @property
    def K(self) -> int:
        return self.D.shape[1]

    @property
    def n3(self) -> int:
        return self.D.shape[2]

    def atom_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.D * self.D, axis=(0, 2)))

    def metadata(self) -> dict:
        return {
            "K": self.K,
            "d": self.d,
            "n3": self.n3,
            "lambda": self.lam,
            "rho": self.rho,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "p": self.p,
            "q": self.q,
            "center": self.center,
            "scale": self.scale,
        }

    @classmethod
    def from_metadata(cls, D: np.ndarray, meta: dict[str, str]) -> "Dictionary":
        """Rebuild from a TensorFile payload and its sidecar."""
        D = as_tensor3(D, "dictionary")
        for key, size in (("K", D.shape[1]), ("d", D.shape[0]), ("n3", D.shape[2])):
            if key in meta and int(meta[key]) != size:
                raise ShapeMismatch(f"Sidecar says {key}={meta[key]}, tensor has {size}")

        def opt(key, conv):
            return conv(meta[key]) if key in meta else None

        return cls(
            D=D,
            seed=opt("seed", int),
            sweeps=opt("sweeps", int) or 0,
            lam=opt("lambda", float),
            rho=opt("rho", float),
            p=opt("p", int),
            q=opt("q", int),
            center=meta.get("center", "false") == "true",
            scale=opt("scale", float) or 1.0,
        )


@dataclass
class AtomReplacement:
    sweep: int
    atom: int
    column: int


@dataclass
class TrainReport:
    """Per-sweep errors after the coding and atom-update half-steps."""

    lam: float
    rho: float
    seed: int
    coding_errors: list[float] = field(default_factory=list)
    representation_errors: list[float] = field(default_factory=list)
    replacements: list[AtomReplacement] = field(default_factory=list)
    coding_converged: list[bool] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def sweeps(self) -> int:
        return len(self.representation_errors)

    def to_frame(self) -> pd.DataFrame:
        replaced = [
            sum(1 for r in self.replacements if r.sweep == s)
            for s in range(1, self.sweeps + 1)
        ]
        return pd.DataFrame(
            {
                "sweep": np.arange(1, self.sweeps + 1),
                "coding_error": self.coding_errors,
                "representation_error": self.representation_errors,
                "atoms_replaced": replaced,
            }
        )


@dataclass
class AtomUpdate:
    atom: np.ndarray  # d x 1 x n3
    coefficients: np.ndarray  # 1 x n x n3, zero outside the support
    support: np.ndarray  # column indices w_k
    replaced_by: int | None = None
    triplet: Rank1Triplet | None = None
    # E_k restricted to the support, before the update
    restricted: np.ndarray | None = None


def _normalize_columns(Y: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(Y * Y, axis=(0, 2)))
    return Y / norms[None, :, None]


def init_dictionary(Y: np.ndarray, K: int, seed: int) -> Dictionary:
    """K distinct training columns sampled without replacement, each normalized."""
    Y = as_tensor3(Y, "Y")
    n = Y.shape[1]
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if n < K:
        raise InsufficientData(f"Need at least K={K} training columns, got {n}")

    rng = stream(seed, "init")
    norms = np.sqrt(np.sum(Y * Y, axis=(0, 2)))
    chosen: list[int] = []
    atoms: list[np.ndarray] = []
    for j in rng.permutation(n):
        if norms[j] == 0:
            continue
        atom = (Y[:, j, :] / norms[j]).ravel()
        if any(np.dot(atom, other) >= 1 - 1e-6 for other in atoms):
            continue
        chosen.append(int(j))
        atoms.append(atom)
        if len(chosen) == K:
            break
    if len(chosen) < K:
        raise InsufficientData(
            f"Only {len(chosen)} distinct nonzero training columns available for K={K}"
        )
    D = _normalize_columns(Y[:, chosen, :])
    return Dictionary(D=np.ascontiguousarray(D), seed=seed)


def atom_update(
    D: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    k: int,
    residual: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    full_svd: bool = False,
    exclude: set[int] | None = None,
) -> AtomUpdate:
    """Update atom k and its coefficient row.

    residual, when given, must equal Y - D * X; the trainer keeps it current
    across atoms so that E_k is never formed from scratch. exclude lists
    columns already used for replacements in this pass.
    """
    d, K, n3 = D.shape
    if X.shape[0] != K or X.shape[2] != n3 or Y.shape[0] != d or Y.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"Inconsistent shapes D {D.shape}, X {X.shape}, Y {Y.shape}")
    if residual is None:
        residual = Y - tprod(D, X)

    support = np.flatnonzero(tube_norms(X[k:k + 1])[0] > 0)
    if support.size == 0:
        # Worst-represented training column, normalized
        col_norms = np.sqrt(np.sum(residual * residual, axis=(0, 2)))
        data_norms = np.sqrt(np.sum(Y * Y, axis=(0, 2)))
        col_norms[data_norms == 0] = -1.0
        if exclude:
            col_norms[list(exclude)] = -1.0
        j = int(np.argmax(col_norms))
        if col_norms[j] <= 0:
            return AtomUpdate(atom=D[:, k:k + 1].copy(), coefficients=X[k:k + 1].copy(), support=support)
        atom = Y[:, j:j + 1, :] / data_norms[j]
        return AtomUpdate(
            atom=atom,
            coefficients=X[k:k + 1].copy(),
            support=support,
            replaced_by=j,
        )

    atom_k = D[:, k:k + 1, :]
    R = residual[:, support, :] + tprod(atom_k, X[k:k + 1, support, :])

    if full_svd:
        F = tsvd(R)
        triplet = Rank1Triplet(
            u=F.U[:, :1, :],
            s=F.S[0, 0, :],
            v=F.V[:, :1, :],
            iterations=0,
            converged=True,
        )
    else:
        triplet = tubal_rank1_approx(R, iters=POWER_ITERS, rng=rng, start=atom_k)

    coefficients = np.zeros((1, X.shape[1], n3))
    coefficients[:, support, :] = tprod(triplet.s.reshape(1, 1, n3), ttranspose(triplet.v))
    return AtomUpdate(
        atom=triplet.u,
        coefficients=coefficients,
        support=support,
        triplet=triplet,
        restricted=R,
    )


def train(
    Y: np.ndarray,
    K: int,
    lam: float,
    sweeps: int,
    seed: int,
    rho: float = DEFAULT_RHO,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    min_improvement: float | None = 1e-4,
    full_svd: bool = False,
    verbose: bool = False,
) -> tuple[Dictionary, np.ndarray, TrainReport]:
    """Learn a K-atom tensor dictionary from the tensor columns of Y.

    Stops after `sweeps` sweeps, or earlier once the representation error
    improves by less than `min_improvement` (relative) between sweeps.

    Args:
        Y: d x n x n3 training columns.
        K: Number of atoms.
        lam: Sparsity weight of the coding stage.
        sweeps: Maximum number of coding + atom-pass sweeps.
        seed: Seeds the initial atoms and the power iterations.
        min_improvement: Relative early-exit threshold; None or 0 disables it.
        full_svd: Use the full t-SVD instead of power iteration in atom updates.
        verbose: Print one line per sweep.
    """
    Y = as_tensor3(Y, "Y")
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")

    dictionary = init_dictionary(Y, K, seed)
    dictionary.lam, dictionary.rho = lam, rho
    D = dictionary.D.copy()
    power_rng = stream(seed, "power")
    report = TrainReport(lam=lam, rho=rho, seed=seed)
    X = np.zeros((K, Y.shape[1], Y.shape[2]))

    for sweep in range(1, sweeps + 1):
        result = sparse_code(SparseCodeProblem(Y, D, lam, rho=rho, max_iters=max_iters, tol=tol))
        X = result.X.copy()
        residual = Y - tprod(D, X)
        coding_error = fro_norm(residual)

        used: set[int] = set()
        for k in range(K):
            upd = atom_update(
                D, X, Y, k,
                residual=residual,
                rng=power_rng,
                full_svd=full_svd,
                exclude=used,
            )
            if upd.replaced_by is not None:
                used.add(upd.replaced_by)
                report.replacements.append(AtomReplacement(sweep, k, upd.replaced_by))
                D[:, k:k + 1, :] = upd.atom
                continue
            if upd.support.size == 0:
                continue
            w = upd.support
            D[:, k:k + 1, :] = upd.atom
            X[k:k + 1, w, :] = upd.coefficients[:, w, :]
            residual[:, w, :] = upd.restricted - tprod(upd.atom, X[k:k + 1, w, :])

        representation_error = fro_norm(residual)
        report.coding_errors.append(coding_error)
        report.representation_errors.append(representation_error)
        report.coding_converged.append(result.converged)
        dictionary.sweeps = sweep

        if verbose:
            replaced = sum(1 for r in report.replacements if r.sweep == sweep)
            print(
                f"  Sweep {sweep}: coding {coding_error:.6g} -> atoms {representation_error:.6g}"
                f" ({replaced} replaced, ADMM {result.iterations} iters)"
            )
        if representation_error > coding_error + 1e-6:
            print(
                f"Warning: atom pass increased the error in sweep {sweep} "
                f"({coding_error:.6g} -> {representation_error:.6g})",
                file=sys.stderr,
            )

        if min_improvement and sweep > 1:
            previous = report.representation_errors[-2]
            if previous - representation_error < min_improvement * previous:
                report.stopped_early = sweep < sweeps
                break

    dictionary.D = D
    return dictionary, X, report
