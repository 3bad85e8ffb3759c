"""Additive domain-decomposition preconditioners T^{-1} = sum R_i^T A_i^{-1} R_i
with exact-Cholesky or recursive-skeletonization subdomain backends, plus the
identity and the global skeletonization factorization used directly as a
preconditioner."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import CBD, Decomposition, Partitioning
from .kernel import KernelOperator
from .linalg import NotPositiveDefinite, cholesky
from .rskel import ProxyConfig, SkelFactor, build_tree, factorize

NONE = "none"
RS_GLOBAL = "rs-global"
EXACT = "exact"
RSKEL = "rskel"

DENSE_LIMIT_DEFAULT = 4096


@dataclass
class _ExactSolver:
    indices: np.ndarray
    factor: object  # CholeskyFactor

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.solve(rhs)

    @property
    def size(self) -> int:
        return self.indices.size

    def stats(self) -> dict:
        s = self.size
        return {"S": s, "memory_bytes": 8 * (s * s + s), "t_factor": 0.0}


@dataclass
class _MirroredSolver:
    """Solves A_i x = b through the factor of a reflection-equivalent
    subdomain: A_i = P A_ref P^T for a grid-reflection permutation P."""

    indices: np.ndarray
    reference: object
    perm: np.ndarray  # position map into the reference subdomain

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        buf = np.empty_like(rhs)
        buf[self.perm] = rhs
        return self.reference.solve(buf)[self.perm]

    @property
    def size(self) -> int:
        return self.indices.size

    def stats(self) -> dict:
        return {"S": self.size, "memory_bytes": 8 * self.size, "t_factor": 0.0}


@dataclass
class _RskelSolver:
    indices: np.ndarray
    factor: SkelFactor

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.apply_inverse(rhs)

    @property
    def size(self) -> int:
        return self.indices.size

    def stats(self) -> dict:
        return self.factor.stats()


class Preconditioner:
    """Applies T^{-1}; build through the module-level constructors."""

    def __init__(self, kind: str, n: int, solvers, backend: str, t_factor: float):
        self.kind = kind
        self.n = n
        self.backend = backend
        self._solvers = solvers
        self.t_factor = t_factor

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {f.shape}")
        if not self._solvers:
            return f.copy()
        out = np.zeros_like(f)
        for solver in self._solvers:
            out[solver.indices] += solver.solve(f[solver.indices])
        return out

    def apply_dense(self) -> np.ndarray:
        """Materialize T^{-1} as a dense matrix (exact backends only)."""
        out = np.zeros((self.n, self.n))
        if not self._solvers:
            np.fill_diagonal(out, 1.0)
            return out
        for solver in self._solvers:
            if isinstance(solver, _RskelSolver):
                raise ValueError(
                    "dense materialization needs the exact backend; "
                    "rebuild the preconditioner with backend='exact'"
                )
            idx = solver.indices
            out[np.ix_(idx, idx)] += solver.solve(np.eye(idx.size))
        return 0.5 * (out + out.T)

    @property
    def n_subdomains(self) -> int:
        return max(len(self._solvers), 1)

    def stats(self) -> dict:
        """Aggregate of the subdomain solver stats; S is the per-subproblem
        maximum (root DOFs for skeletonized solvers, block size for exact)."""
        per = [s.stats() for s in self._solvers]
        return {
            "S": max((p["S"] for p in per), default=0),
            "memory_bytes": sum(p["memory_bytes"] for p in per),
            "t_factor": self.t_factor,
        }


def identity(n: int) -> Preconditioner:
    return Preconditioner(kind=NONE, n=n, solvers=[], backend=EXACT, t_factor=0.0)


def _reflection_permutation(
    decomposition: Decomposition, target: int, reference: int
) -> np.ndarray:
    """Position map pi with I_target[k] reflecting onto I_reference[pi[k]]."""
    grid = decomposition.grid
    n = grid.n_per_dim
    bits_t = np.array(decomposition.region_cells[target][0]) % 2
    bits_r = np.array(decomposition.region_cells[reference][0]) % 2
    flip = bits_t != bits_r
    src = decomposition.subdomains[target]
    ref = decomposition.subdomains[reference]
    multi = np.stack(np.unravel_index(src, grid.shape), axis=1)
    multi[:, flip] = n - 1 - multi[:, flip]
    reflected = np.ravel_multi_index(tuple(multi.T), grid.shape)
    pos = np.searchsorted(ref, reflected)
    if pos.max(initial=-1) >= ref.size or not np.array_equal(ref[pos], reflected):
        raise ValueError("subdomains are not reflection images of each other")
    return pos


def from_decomposition(
    op: KernelOperator,
    decomposition: Decomposition,
    backend: str = EXACT,
    eps: float = 1e-3,
    proxy: ProxyConfig | None = None,
    dense_limit: int = DENSE_LIMIT_DEFAULT,
    share_mirrored_subdomains: bool = False,
) -> Preconditioner:
    """Factorize every subdomain block A_i = A(I_i, I_i) with the chosen
    backend.

    ``share_mirrored_subdomains`` factorizes only the first CBD subdomain
    and solves the others through the grid-reflection permutations that map
    them onto it (valid for uniform CBD decompositions with even m); it cuts
    memory by 2^dim on large exact subproblems.
    """
    if backend not in (EXACT, RSKEL):
        raise ValueError(f"backend must be 'exact' or 'rskel', got {backend!r}")
    start = time.perf_counter()
    solvers = []
    share = (
        share_mirrored_subdomains
        and decomposition.kind == CBD
        and decomposition.m_per_dim % 2 == 0
        and backend == EXACT
    )
    for i, idx in enumerate(decomposition.subdomains):
        if share and i > 0:
            perm = _reflection_permutation(decomposition, i, 0)
            solvers.append(
                _MirroredSolver(indices=idx, reference=solvers[0], perm=perm)
            )
            continue
        if backend == EXACT:
            if idx.size > dense_limit:
                raise ValueError(
                    f"subdomain {i} has {idx.size} points > dense_limit="
                    f"{dense_limit}; use backend='rskel'"
                )
            try:
                factor = cholesky(op.assemble_block(idx, idx), context=f"subdomain {i}")
            except NotPositiveDefinite as exc:
                raise NotPositiveDefinite(f"subdomain {i}: {exc}") from exc
            solvers.append(_ExactSolver(indices=idx, factor=factor))
        else:
            tree = build_tree(decomposition, subdomain=i)
            try:
                factor = factorize(op, tree, eps, proxy)
            except NotPositiveDefinite as exc:
                raise NotPositiveDefinite(f"subdomain {i}: {exc}") from exc
            solvers.append(_RskelSolver(indices=factor.owned, factor=factor))
    return Preconditioner(
        kind=decomposition.kind,
        n=op.n,
        solvers=solvers,
        backend=backend,
        t_factor=time.perf_counter() - start,
    )


def rs_global(
    op: KernelOperator,
    partitioning: Partitioning,
    eps: float = 1e-3,
    proxy: ProxyConfig | None = None,
) -> Preconditioner:
    """Global-mode skeletonization of A itself, applied as T^{-1} = F^{-1}."""
    start = time.perf_counter()
    factor = factorize(op, build_tree(partitioning), eps, proxy)
    solver = _RskelSolver(indices=factor.owned, factor=factor)
    return Preconditioner(
        kind=RS_GLOBAL,
        n=op.n,
        solvers=[solver],
        backend=RSKEL,
        t_factor=time.perf_counter() - start,
    )
