"""Uniform grids, partitionings, overlapping extensions, colorings and
domain decompositions on the unit cube.

Everything here is pure index bookkeeping: grid points are identified by
their lexicographic index (C order, last axis fastest) and all sets are
sorted int64 arrays, so restriction/prolongation downstream is plain
gather/scatter.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

JACOBI = "jacobi"
SCHWARZ = "schwarz"
CBD = "cbd"
KINDS = (JACOBI, SCHWARZ, CBD)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of n^dim cell midpoints in [0,1]^dim."""

    dim: int
    n_per_dim: int

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_per_dim

    @property
    def n_points(self) -> int:
        return self.n_per_dim**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_dim,) * self.dim

    def multi_indices(self) -> np.ndarray:
        """(N, dim) integer multi-indices in lexicographic (C) order."""
        return np.indices(self.shape).reshape(self.dim, -1).T.astype(np.int64)

    @property
    def points(self) -> np.ndarray:
        """(N, dim) midpoint coordinates h*(j + 1/2), 0-based j."""
        return (self.multi_indices() + 0.5) * self.spacing

    def index_of(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in multi), self.shape))

    def multi_of(self, index: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(index), self.shape))


def build_grid(dim: int, n_per_dim: int) -> Grid:
    """Build a uniform midpoint grid.

    dim 2 and 3 are the production cases; dim 1 is supported for the
    two-subdomain spectral-pairing harness.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if n_per_dim < 2:
        raise ValueError(f"n_per_dim must be >= 2, got {n_per_dim}")
    return Grid(dim=dim, n_per_dim=n_per_dim)


def _box_indices(grid: Grid, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sorted grid indices of the axis-aligned index box [lo, hi] (inclusive),
    clipped to the grid."""
    n = grid.n_per_dim
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, n - 1)
    if np.any(hi < lo):
        return np.empty(0, dtype=np.int64)
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    flat = np.ravel_multi_index([m.ravel() for m in mesh], grid.shape)
    return np.sort(flat.astype(np.int64))


@dataclass(frozen=True)
class Partitioning:
    """Uniform non-overlapping partitioning into m^dim axis-aligned blocks.

    Partition order is lexicographic in the partition-lattice multi-index.
    """

    grid: Grid
    m_per_dim: int
    partitions: list[np.ndarray] = field(repr=False)

    @property
    def n_partitions(self) -> int:
        return self.m_per_dim**self.grid.dim

    @property
    def block_width(self) -> int:
        return self.grid.n_per_dim // self.m_per_dim

    def lattice_cells(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.m_per_dim), repeat=self.grid.dim))


def build_partitioning(grid: Grid, m_per_dim: int) -> Partitioning:
    if m_per_dim < 1:
        raise ValueError(f"m_per_dim must be >= 1, got {m_per_dim}")
    if grid.n_per_dim % m_per_dim != 0:
        raise ValueError(
            f"m_per_dim={m_per_dim} does not divide n_per_dim={grid.n_per_dim}"
        )
    q = grid.n_per_dim // m_per_dim
    parts = []
    for cell in itertools.product(range(m_per_dim), repeat=grid.dim):
        lo = np.array(cell, dtype=np.int64) * q
        parts.append(_box_indices(grid, lo, lo + q - 1))
    return Partitioning(grid=grid, m_per_dim=m_per_dim, partitions=parts)


@dataclass(frozen=True)
class ExtendedPartitioning:
    """Partitions dilated by `overlap_width` grid layers per direction,
    clipped at the domain boundary."""

    partitioning: Partitioning
    overlap_width: int
    extended: list[np.ndarray] = field(repr=False)


def extend_partitions(
    partitioning: Partitioning, overlap_width: int
) -> ExtendedPartitioning:
    if overlap_width < 0:
        raise ValueError(f"overlap_width must be >= 0, got {overlap_width}")
    grid = partitioning.grid
    q = partitioning.block_width
    w = overlap_width
    ext = []
    for cell in partitioning.lattice_cells():
        lo = np.array(cell, dtype=np.int64) * q - w
        hi = np.array(cell, dtype=np.int64) * q + q - 1 + w
        ext.append(_box_indices(grid, lo, hi))
    return ExtendedPartitioning(
        partitioning=partitioning, overlap_width=overlap_width, extended=ext
    )


@dataclass(frozen=True)
class Coloring:
    """Parity coloring of the partition lattice; colors are 1-based."""

    partitioning: Partitioning
    colors: np.ndarray
    num_colors: int

    def members(self, color: int) -> np.ndarray:
        """Partition ids carrying `color`."""
        return np.nonzero(self.colors == color)[0]


def color_partitions(partitioning: Partitioning) -> Coloring:
    """Deterministic 2^dim parity coloring: the color of lattice cell
    (a_1,...,a_d) is the bit pattern (a_1 mod 2, ..., a_d mod 2)."""
    dim = partitioning.grid.dim
    cells = np.array(partitioning.lattice_cells(), dtype=np.int64)
    bits = cells % 2
    weights = 1 << np.arange(dim)
    colors = (bits @ weights) + 1
    return Coloring(
        partitioning=partitioning,
        colors=colors.astype(np.int64),
        num_colors=2**dim,
    )


def partitions_adjacent(partitioning: Partitioning, i: int, j: int) -> bool:
    """Lattice adjacency including edges and corners (Chebyshev distance 1)."""
    cells = partitioning.lattice_cells()
    a, b = np.array(cells[i]), np.array(cells[j])
    return i != j and np.max(np.abs(a - b)) <= 1


@dataclass(frozen=True)
class Decomposition:
    """Subdomain index sets for one of the three preconditioner families.

    `regions` keeps, per subdomain, the constituent extended partitions
    (one region for Jacobi/Schwarz, the same-color regions for CBD) along
    with their partition-lattice cells; the skeletonization tree builder
    consumes them.
    """

    kind: str
    grid: Grid
    m_per_dim: int
    overlap_width: int
    subdomains: list[np.ndarray] = field(repr=False)
    regions: list[list[np.ndarray]] = field(repr=False)
    region_cells: list[list[tuple[int, ...]]] = field(repr=False)

    @property
    def n_subdomains(self) -> int:
        return len(self.subdomains)


def build_decomposition(
    grid: Grid, m_per_dim: int, overlap_width: int, kind: str
) -> Decomposition:
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    part = build_partitioning(grid, m_per_dim)
    cells = part.lattice_cells()
    if kind == JACOBI:
        subs = [p.copy() for p in part.partitions]
        regions = [[p.copy()] for p in part.partitions]
        region_cells = [[c] for c in cells]
    else:
        ext = extend_partitions(part, overlap_width)
        if kind == SCHWARZ:
            subs = [e.copy() for e in ext.extended]
            regions = [[e.copy()] for e in ext.extended]
            region_cells = [[c] for c in cells]
        else:
            coloring = color_partitions(part)
            subs, regions, region_cells = [], [], []
            for color in range(1, coloring.num_colors + 1):
                ids = coloring.members(color)
                regs = [ext.extended[i].copy() for i in ids]
                subs.append(np.unique(np.concatenate(regs)))
                regions.append(regs)
                region_cells.append([cells[i] for i in ids])
    return Decomposition(
        kind=kind,
        grid=grid,
        m_per_dim=m_per_dim,
        overlap_width=overlap_width if kind != JACOBI else 0,
        subdomains=subs,
        regions=regions,
        region_cells=region_cells,
    )
