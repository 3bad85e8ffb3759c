"""Entry-wise evaluation of the discretized single-layer volume operator.

Off-diagonal entries are h^dim * K(x_i - x_j) with K the free-space Laplace
kernel; the diagonal is the singular self-integral of K over one grid cell,
computed by adaptive quadrature on a desingularized reduced form.

Two lattice conventions are supported for the pairwise distances:

* ``"cell"``: distances on the cell-midpoint lattice, spacing 1/n.  This is
  the plain collocation formula and the 3D default.
* ``"span"``: distances on the inclusive-span lattice, spacing 1/(n-1).
  This is the 2D default; all 2D reference eigenvalue/iteration data this
  package reproduces was generated with span-lattice distances.

Quadrature weights and the diagonal self-integral always use the cell size
h = 1/n.  The 1D mode (pairing-test harness) pairs the 2D log kernel with
weight h and the segment self-integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Grid

TWO_PI = 2.0 * np.pi


class QuadratureError(RuntimeError):
    """Adaptive panel refinement failed to converge."""


def kernel_value(r) -> float:
    """Free-space Laplace kernel at separation vector r (length 2 or 3)."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size not in (2, 3):
        raise ValueError(f"r must be a 2- or 3-vector, got shape {r.shape}")
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise ValueError("kernel is singular at r = 0; diagonal handled separately")
    if r.size == 2:
        return -np.log(dist) / TWO_PI
    return 1.0 / (2.0 * TWO_PI * dist)


# 20-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _adaptive_panels(f, a: float, b: float, rtol: float = 1e-13) -> float:
    """Composite Gauss-Legendre with panel doubling until two successive
    refinements agree to rtol (relative)."""
    prev = None
    for k in range(13):
        edges = np.linspace(a, b, 2**k + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        w = (half[:, None] * _GL_W[None, :]).ravel()
        val = float(np.dot(w, f(x)))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
    raise QuadratureError(f"panel refinement did not converge on [{a}, {b}]")


@lru_cache(maxsize=None)
def diagonal_entry(dim: int, h: float) -> float:
    """Self-interaction integral of the kernel over one grid cell of size h.

    2D: polar splitting of the square into 8 congruent triangles reduces the
    log singularity to a smooth 1D integrand.  3D: a Duffy-type pyramid
    transform with the inner double integral done analytically leaves a
    smooth 1D integrand.  1D: segment integral of the 2D log kernel.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    b = h / 2.0
    if dim == 2:
        # int over triangle 0<=theta<=pi/4, 0<=r<=b/cos(theta) of ln(r) r dr
        def g(theta):
            R = b / np.cos(theta)
            return R * R * (0.5 * np.log(R) - 0.25)

        return -8.0 * _adaptive_panels(g, 0.0, np.pi / 4.0) / TWO_PI
    if dim == 3:
        # pyramid z>=max(|x|,|y|), x=zu, y=zv: 6 * (b^2/2) * \iint (1+u^2+v^2)^{-1/2}
        # with the u-integral analytic: 2*asinh(1/sqrt(1+v^2))
        def g(v):
            return 2.0 * np.arcsinh(1.0 / np.sqrt(1.0 + v * v))

        return 3.0 * b * b * _adaptive_panels(g, -1.0, 1.0) / (2.0 * TWO_PI)
    if dim == 1:
        # (-1/2pi) * int_{-h/2}^{h/2} ln|t| dt
        return (h / TWO_PI) * (1.0 - np.log(b))
    raise ValueError(f"dim must be 1, 2 or 3, got {dim}")


CELL = "cell"
SPAN = "span"


def _default_lattice(dim: int) -> str:
    return SPAN if dim == 2 else CELL


@dataclass(frozen=True)
class KernelOperator:
    """Dense SPD operator A: entry-wise and block-wise access.

    ``coords`` are the effective kernel coordinates (lattice scaled by the
    convention spacing); ``weight`` is the quadrature weight h^dim applied to
    off-diagonal entries.
    """

    grid: Grid
    lattice: str
    diag_value: float

    @property
    def n(self) -> int:
        return self.grid.n_points

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def lattice_spacing(self) -> float:
        if self.lattice == CELL:
            return self.grid.spacing
        return 1.0 / (self.grid.n_per_dim - 1)

    @property
    def weight(self) -> float:
        return self.grid.spacing**self.grid.dim

    @property
    def coords(self) -> np.ndarray:
        """(N, dim) kernel-space coordinates of the grid points."""
        return self.grid.multi_indices() * self.lattice_spacing

    def _kernel_of_dist(self, dist: np.ndarray) -> np.ndarray:
        if self.grid.dim == 3:
            return 1.0 / (2.0 * TWO_PI * dist)
        return -np.log(dist) / TWO_PI

    def kernel_rows(self, points: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Raw kernel values (no quadrature weight) between arbitrary
        kernel-space points (k, dim) and grid columns."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        target = self.coords[np.asarray(cols, dtype=np.int64)]
        d2 = np.zeros((pts.shape[0], target.shape[0]))
        for k in range(self.grid.dim):
            diff = pts[:, k][:, None] - target[:, k][None, :]
            d2 += diff * diff
        return self._kernel_of_dist(np.sqrt(d2))

    def entry(self, i: int, j: int) -> float:
        if i == j:
            return self.diag_value
        block = self.assemble_block(
            np.array([i], dtype=np.int64), np.array([j], dtype=np.int64)
        )
        return float(block[0, 0])

    def assemble_block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense sub-block A[rows, cols]."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        ri = self.coords[rows]
        rj = self.coords[cols]
        d2 = np.zeros((rows.size, cols.size))
        for k in range(self.grid.dim):
            diff = ri[:, k][:, None] - rj[:, k][None, :]
            d2 += diff * diff
        same = d2 == 0.0
        dist = np.sqrt(np.where(same, 1.0, d2))
        block = self.weight * self._kernel_of_dist(dist)
        block[same] = self.diag_value
        return block

    def dense(self) -> np.ndarray:
        idx = np.arange(self.n, dtype=np.int64)
        return self.assemble_block(idx, idx)

    def toeplitz_generator(self) -> np.ndarray:
        """Kernel tensor over non-negative lags, shape (n,)*dim; lag 0 holds
        the diagonal value.  A[i,j] = gen[|i-j|] componentwise."""
        n = self.grid.n_per_dim
        lags = np.indices((n,) * self.grid.dim).astype(float) * self.lattice_spacing
        d2 = np.sum(lags * lags, axis=0)
        dist = np.sqrt(np.where(d2 == 0.0, 1.0, d2))
        gen = self.weight * self._kernel_of_dist(dist)
        gen[(0,) * self.grid.dim] = self.diag_value
        return gen


def build_operator(grid: Grid, lattice: str | None = None) -> KernelOperator:
    """Assemble the operator metadata for a grid; entries are produced on
    demand by the accessors."""
    lat = lattice or _default_lattice(grid.dim)
    if lat not in (CELL, SPAN):
        raise ValueError(f"lattice must be 'cell' or 'span', got {lattice!r}")
    if lat == SPAN and grid.n_per_dim < 2:
        raise ValueError("span lattice needs n_per_dim >= 2")
    return KernelOperator(
        grid=grid,
        lattice=lat,
        diag_value=diagonal_entry(grid.dim, grid.spacing),
    )
