"""Dense-scale spectral analysis of the preconditioned operator T^{-1}A.

The spectrum is computed from the symmetric congruence G^T A G where
T^{-1} = G G^T is the Cholesky factorization of the materialized
preconditioner; the congruence is similar to T^{-1}A, so the spectra agree
while symmetry guarantees real output.

For problem sizes past the dense limit a Lanczos iteration in the A-inner
product (where T^{-1}A is self-adjoint) estimates a single extremal
eigenvalue; only the interface-size sweeps use it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geometry import Decomposition, Grid
from .kernel import KernelOperator
from .precond import Preconditioner, from_decomposition

DENSE_LIMIT_SPECTRUM = 4096
MULTIPLICITY_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumReport:
    lambda_min: float
    lambda_max: float
    eigenvalues: np.ndarray = field(repr=False)
    multiplicity_at_max: int
    config: dict


def _congruence_factor(precond: Preconditioner) -> np.ndarray:
    tinv = precond.apply_dense()
    try:
        return sla.cholesky(tinv, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise RuntimeError(
            "materialized preconditioner is not numerically SPD"
        ) from exc


def preconditioned_spectrum(
    op: KernelOperator,
    precond: Preconditioner,
    dense_limit: int = DENSE_LIMIT_SPECTRUM,
    config: dict | None = None,
) -> SpectrumReport:
    if op.n > dense_limit:
        raise ValueError(
            f"N={op.n} exceeds dense_limit={dense_limit}; raise the limit "
            "explicitly for larger dense spectra"
        )
    a = op.dense()
    g = _congruence_factor(precond)
    sym = g.T @ (a @ g)
    w = sla.eigh(sym, eigvals_only=True, check_finite=False)
    lam_max = float(w[-1])
    return SpectrumReport(
        lambda_min=float(w[0]),
        lambda_max=lam_max,
        eigenvalues=w,
        multiplicity_at_max=int(np.sum(np.abs(w - lam_max) <= MULTIPLICITY_TOL)),
        config=dict(config or {}, N=op.n, kind=precond.kind, D=precond.n_subdomains),
    )


def multiplicity_at(report: SpectrumReport, value: float, tol: float) -> int:
    return int(np.sum(np.abs(report.eigenvalues - value) <= tol))


def extremal_eigenvector(
    op: KernelOperator,
    precond: Preconditioner,
    which: str,
    dense_limit: int = DENSE_LIMIT_SPECTRUM,
) -> tuple[float, np.ndarray]:
    """Extremal eigenpair of T^{-1}A; the eigenvector is unit-norm with the
    largest-magnitude entry positive.  Inside a degenerate extremal
    eigenspace the returned direction is whichever the dense solver
    produces."""
    if which not in ("min", "max"):
        raise ValueError(f"which must be 'min' or 'max', got {which!r}")
    if op.n > dense_limit:
        raise ValueError(f"N={op.n} exceeds dense_limit={dense_limit}")
    a = op.dense()
    g = _congruence_factor(precond)
    sym = g.T @ (a @ g)
    w, vecs = sla.eigh(sym, check_finite=False)
    col = 0 if which == "min" else -1
    vec = g @ vecs[:, col]
    vec /= np.linalg.norm(vec)
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return float(w[col]), vec


def jacobi_pairing_check(op: KernelOperator, decomposition: Decomposition) -> float:
    """For a two-subdomain non-overlapping split, the spectrum of T^{-1}A is
    symmetric about 1; returns max_k |lambda_k + lambda_{N+1-k} - 2|."""
    if decomposition.kind != "jacobi" or decomposition.n_subdomains != 2:
        raise ValueError("pairing check needs a two-subdomain Jacobi decomposition")
    precond = from_decomposition(op, decomposition, backend="exact", dense_limit=op.n)
    report = preconditioned_spectrum(op, precond, dense_limit=op.n)
    w = report.eigenvalues
    return float(np.max(np.abs(w + w[::-1] - 2.0)))


def two_halves_decomposition(grid: Grid) -> Decomposition:
    """Non-overlapping split of the grid into two halves along the first
    axis (the pairing-test configuration)."""
    n = grid.n_per_dim
    if n % 2 != 0:
        raise ValueError("two-halves split needs an even n_per_dim")
    multi = grid.multi_indices()
    left = np.nonzero(multi[:, 0] < n // 2)[0].astype(np.int64)
    right = np.nonzero(multi[:, 0] >= n // 2)[0].astype(np.int64)
    return Decomposition(
        kind="jacobi",
        grid=grid,
        m_per_dim=2,
        overlap_width=0,
        subdomains=[left, right],
        regions=[[left], [right]],
        region_cells=[[(0,) * grid.dim], [(1,) * grid.dim]],
    )


def extremal_eigenvalue_lanczos(
    matvec,
    precond: Preconditioner,
    n: int,
    which: str = "min",
    max_iters: int = 400,
    rtol: float = 1e-9,
    seed: int = 0,
) -> float:
    """Extremal eigenvalue of T^{-1}A via Lanczos in the A-inner product,
    with full reorthogonalization.  Intended for sizes past the dense
    limit; agrees with the dense path to solver accuracy."""
    if which not in ("min", "max"):
        raise ValueError(f"which must be 'min' or 'max', got {which!r}")
    apply_a = matvec.matvec if hasattr(matvec, "matvec") else matvec
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    av = apply_a(v)
    nrm = np.sqrt(v @ av)
    v /= nrm
    av /= nrm
    basis = [v]
    a_basis = [av]
    alphas: list[float] = []
    betas: list[float] = []
    estimate = None
    stable_since = 0
    for j in range(max_iters):
        w = precond.apply(a_basis[j])
        alphas.append(float(w @ a_basis[j]))
        # two-pass A-orthogonalization against the whole basis
        for _ in range(2):
            for vi, avi in zip(basis, a_basis):
                w -= (w @ avi) * vi
        aw = apply_a(w)
        beta2 = float(w @ aw)
        if beta2 <= 0 or not np.isfinite(beta2):
            break
        beta = np.sqrt(beta2)
        ritz = sla.eigvalsh_tridiagonal(np.array(alphas), np.array(betas))
        current = float(ritz[0] if which == "min" else ritz[-1])
        if estimate is not None and abs(current - estimate) <= rtol * max(
            abs(current), 1.0
        ):
            stable_since += 1
            if stable_since >= 5:
                return current
        else:
            stable_since = 0
        estimate = current
        if beta < 1e-14:
            break
        betas.append(beta)
        basis.append(w / beta)
        a_basis.append(aw / beta)
    if estimate is None:
        raise RuntimeError("Lanczos produced no Ritz values")
    return estimate


def dump_eigenvector(path, grid: Grid, vector: np.ndarray) -> None:
    """CSV rows x,y[,z],value for plotting eigenvector fields."""
    pts = grid.points
    header = ",".join("xyz"[: grid.dim]) + ",value"
    data = np.column_stack([pts, np.asarray(vector, dtype=float)])
    np.savetxt(path, data, delimiter=",", header=header, comments="")
