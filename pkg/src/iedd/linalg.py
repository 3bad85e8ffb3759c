"""Dense kernels the solvers are built from: Cholesky with the A = G^T G
convention, triangular solves, pivoted-QR interpolative decomposition, and
symmetric eigendecomposition.

LAPACK (via scipy) does the heavy lifting; this module owns the error
semantics and the ID truncation/interpolation logic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class NotPositiveDefinite(RuntimeError):
    """Cholesky hit a non-positive pivot."""


@dataclass(frozen=True)
class CholeskyFactor:
    """Upper-triangular G with A = G^T G."""

    g: np.ndarray

    @property
    def size(self) -> int:
        return self.g.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """A^{-1} rhs via forward then backward substitution."""
        return solve_triangular(self, solve_triangular(self, rhs, "forward"), "backward")


def cholesky(a: np.ndarray, context: str = "") -> CholeskyFactor:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    try:
        g = sla.cholesky(a, lower=False, check_finite=False)
    except sla.LinAlgError as exc:
        where = f" ({context})" if context else ""
        raise NotPositiveDefinite(f"matrix is not positive definite{where}") from exc
    return CholeskyFactor(g=g)


def solve_triangular(factor: CholeskyFactor, rhs: np.ndarray, side: str) -> np.ndarray:
    """Substitution with the Cholesky factor: 'forward' solves G^T y = rhs,
    'backward' solves G x = rhs."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.size:
        raise ValueError(f"rhs length {rhs.shape[0]} != factor size {factor.size}")
    if side == "forward":
        return sla.solve_triangular(factor.g, rhs, trans="T", lower=False, check_finite=False)
    if side == "backward":
        return sla.solve_triangular(factor.g, rhs, trans="N", lower=False, check_finite=False)
    raise ValueError(f"side must be 'forward' or 'backward', got {side!r}")


@dataclass(frozen=True)
class IdResult:
    """Column interpolative decomposition B[:, redundant] ~= B[:, skeleton] @ interp.

    skeleton/redundant are index subsets of the input columns (each sorted
    ascending); rank = len(skeleton); achieved_eps is the measured relative
    Frobenius residual of the interpolation.
    """

    skeleton: np.ndarray
    redundant: np.ndarray
    interp: np.ndarray
    rank: int
    achieved_eps: float


def interpolative_decomposition(b: np.ndarray, eps: float) -> IdResult:
    """Column-pivoted QR truncated at the first diagonal entry with
    |R_kk| <= eps * |R_11|; ties in pivot magnitude resolve to the lowest
    column index (LAPACK geqp3 behavior), so results are deterministic."""
    b = np.asarray(b, dtype=float)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if b.ndim != 2 or b.shape[1] == 0:
        raise ValueError(f"expected a matrix with >= 1 column, got shape {b.shape}")
    ncols = b.shape[1]
    _, r, piv = sla.qr(b, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        below = np.nonzero(diag <= eps * diag[0])[0]
        rank = int(below[0]) if below.size else int(diag.size)
    rank = min(rank, ncols)
    if rank == 0:
        skeleton = np.empty(0, dtype=np.int64)
        redundant = np.sort(piv.astype(np.int64))
        interp = np.zeros((0, ncols))
    else:
        t = sla.solve_triangular(
            r[:rank, :rank], r[:rank, rank:], lower=False, check_finite=False
        )
        skeleton = piv[:rank].astype(np.int64)
        redundant = piv[rank:].astype(np.int64)
        s_order = np.argsort(skeleton)
        r_order = np.argsort(redundant)
        skeleton = skeleton[s_order]
        redundant = redundant[r_order]
        interp = t[np.ix_(s_order, r_order)]
    if redundant.size:
        resid = np.linalg.norm(b[:, redundant] - b[:, skeleton] @ interp)
        denom = np.linalg.norm(b[:, redundant])
        achieved = resid / denom if denom > 0 else 0.0
    else:
        achieved = 0.0
    return IdResult(
        skeleton=skeleton,
        redundant=redundant,
        interp=interp,
        rank=rank,
        achieved_eps=float(achieved),
    )


def sym_eigs(a: np.ndarray, vectors: bool = False):
    """Eigenvalues (ascending) of a symmetric matrix, optionally with
    eigenvectors as columns."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if vectors:
        w, v = sla.eigh(a, check_finite=False)
        return w, v
    return sla.eigh(a, eigvals_only=True, check_finite=False)
