"""Recursive skeletonization: hierarchical compress-then-eliminate over a
box tree, producing an approximate symmetric factorization of A (Global
mode) or of a subdomain block A_i (Colored mode) whose inverse is cheap to
apply.

Per box at each level: the active columns are compressed against exterior
active DOFs via a proxy-accelerated interpolative decomposition, then the
redundant DOFs are eliminated by a block step that only modifies the box's
own diagonal block.  Cross-box blocks remain pristine kernel entries at
every level, which is what makes the proxy compression legitimate.

All boxes at one level are compressed against the level-start snapshot of
active DOFs, so boxes within a level are independent of each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .geometry import Decomposition, Partitioning
from .kernel import KernelOperator
from .linalg import NotPositiveDefinite, cholesky, interpolative_decomposition

GLOBAL = "global"
COLORED = "colored"


@dataclass(frozen=True)
class ProxyConfig:
    """Proxy-surface acceleration of the per-box ID.

    The proxy surface is a circle (2D) or quasi-uniform sphere (3D) of
    radius ``radius_factor`` times the box circumradius; exterior active
    DOFs inside that radius enter the ID input exactly.
    """

    radius_factor: float = 1.5
    points_2d: int = 64
    points_3d: int = 288

    def __post_init__(self):
        if self.radius_factor <= 1.0:
            raise ValueError("radius_factor must be > 1")
        if self.points_2d < 8 or self.points_3d < 12:
            raise ValueError("proxy point counts must be >= 4*dim")

    def surface(self, dim: int) -> np.ndarray:
        """Unit-radius surface points, shape (P, dim)."""
        if dim == 2:
            theta = np.linspace(0.0, 2.0 * np.pi, self.points_2d, endpoint=False)
            return np.stack([np.cos(theta), np.sin(theta)], axis=1)
        if dim == 3:
            p = self.points_3d
            i = np.arange(p) + 0.5
            z = 1.0 - 2.0 * i / p
            r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
            golden = np.pi * (3.0 - np.sqrt(5.0))
            theta = golden * np.arange(p)
            return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
        raise ValueError(f"proxy surfaces exist for dim 2 or 3, got dim={dim}")


@dataclass
class Box:
    level: int
    cell: tuple[int, ...]
    children: list["Box"] = field(default_factory=list)
    active: np.ndarray | None = None  # global grid indices, ascending
    diag: np.ndarray | None = None
    schur: np.ndarray | None = None  # B_ss passed to the parent


@dataclass(frozen=True)
class BoxTree:
    """Levels of boxes, leaves first, one root last."""

    mode: str
    dim: int
    levels: list[list[Box]] = field(repr=False)
    owned: np.ndarray = field(repr=False)  # ascending global indices

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def root(self) -> Box:
        return self.levels[-1][0]


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def _merge_levels(leaves: list[Box], extent: int) -> list[list[Box]]:
    """Quadtree/octree merging on the leaf cell lattice of size extent^dim;
    groups 2^dim children sharing the same halved cell per level."""
    levels = [leaves]
    while extent > 1:
        extent //= 2
        parents: dict[tuple[int, ...], Box] = {}
        order: list[tuple[int, ...]] = []
        for child in levels[-1]:
            pc = tuple(c // 2 for c in child.cell)
            if pc not in parents:
                parents[pc] = Box(level=levels[-1][0].level + 1, cell=pc)
                order.append(pc)
            parents[pc].children.append(child)
        levels.append([parents[c] for c in sorted(order)])
    return levels


def build_tree(source, subdomain: int | None = None) -> BoxTree:
    """Build the box hierarchy.

    * ``Partitioning`` source: Global mode; leaves are the partitions and
      2^dim lattice-adjacent boxes merge per level (m must be a power of 2).
    * ``Decomposition`` source plus ``subdomain``: Colored mode; leaves are
      that subdomain's extended regions and same-color regions merge on the
      stride-2 color sublattice.
    """
    if isinstance(source, Partitioning):
        m = source.m_per_dim
        if not _is_power_of_two(m):
            raise ValueError(f"global tree needs m_per_dim a power of 2, got {m}")
        leaves = [
            Box(level=0, cell=cell, active=np.sort(idx))
            for cell, idx in zip(source.lattice_cells(), source.partitions)
        ]
        owned = np.arange(source.grid.n_points, dtype=np.int64)
        return BoxTree(
            mode=GLOBAL,
            dim=source.grid.dim,
            levels=_merge_levels(leaves, m),
            owned=owned,
        )
    if isinstance(source, Decomposition):
        if subdomain is None:
            raise ValueError("colored tree needs the subdomain index")
        regions = source.regions[subdomain]
        cells = source.region_cells[subdomain]
        total = sum(r.size for r in regions)
        owned = np.unique(np.concatenate(regions))
        if owned.size != total:
            raise ValueError(
                "subdomain regions overlap; the tree needs disjoint leaves "
                "(block width must exceed 2*overlap_width)"
            )
        if len(regions) == 1:
            leaves = [Box(level=0, cell=(0,) * source.grid.dim, active=regions[0].copy())]
            return BoxTree(mode=COLORED, dim=source.grid.dim, levels=[leaves], owned=owned)
        parity = tuple(c % 2 for c in cells[0])
        sub_extent = source.m_per_dim // 2
        if not _is_power_of_two(sub_extent):
            raise ValueError(
                f"colored tree needs m_per_dim/2 a power of 2, got m={source.m_per_dim}"
            )
        leaves = []
        for cell, idx in sorted(
            zip(cells, regions), key=lambda t: tuple((np.array(t[0]) - parity) // 2)
        ):
            sub = tuple((np.array(cell) - parity) // 2)
            leaves.append(Box(level=0, cell=sub, active=np.sort(idx)))
        return BoxTree(
            mode=COLORED,
            dim=source.grid.dim,
            levels=_merge_levels(leaves, sub_extent),
            owned=owned,
        )
    raise TypeError(f"cannot build a tree from {type(source).__name__}")


@dataclass(frozen=True)
class _BoxFactor:
    """Elimination data for one box, indices local to the owned set."""

    level: int
    r: np.ndarray
    s: np.ndarray
    t: np.ndarray  # |s| x |r| interpolation
    g: np.ndarray  # upper Cholesky of B_rr
    x: np.ndarray  # B_rr^{-1} B_rs, |r| x |s|


@dataclass
class SkelFactor:
    """Approximate symmetric factorization; apply_inverse solves with it."""

    mode: str
    eps: float
    owned: np.ndarray
    factors: list[_BoxFactor]
    root_s: np.ndarray
    root_g: np.ndarray
    t_factor: float

    @property
    def n(self) -> int:
        return self.owned.size

    @property
    def root_size(self) -> int:
        return self.root_s.size

    def stats(self) -> dict:
        reals = self.root_g.size
        idx_count = self.root_s.size
        for f in self.factors:
            reals += f.t.size + f.g.size + f.x.size
            idx_count += f.r.size + f.s.size
        return {
            "S": self.root_size,
            "memory_bytes": 8 * (reals + idx_count),
            "t_factor": self.t_factor,
        }

    def apply_inverse(self, f: np.ndarray) -> np.ndarray:
        """x ~= A^{-1} f on the owned index set (local ordering)."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {f.shape}")
        w = f.copy()
        for fac in self.factors:
            tr = w[fac.r] - fac.t.T @ w[fac.s]
            w[fac.s] -= fac.x.T @ tr
            w[fac.r] = sla.solve_triangular(
                fac.g, tr, trans="T", lower=False, check_finite=False
            )
        w[self.root_s] = sla.cho_solve(
            (self.root_g, False), w[self.root_s], check_finite=False
        )
        for fac in reversed(self.factors):
            zr = (
                sla.solve_triangular(fac.g, w[fac.r], lower=False, check_finite=False)
                - fac.x @ w[fac.s]
            )
            w[fac.s] -= fac.t @ zr
            w[fac.r] = zr
        return w

    def apply(self, v: np.ndarray) -> np.ndarray:
        """F v where F ~= A (the operator implied by the factors)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got {v.shape}")
        w = v.copy()
        for fac in self.factors:
            w[fac.s] += fac.t @ w[fac.r]
            w[fac.r] = fac.g @ (w[fac.r] + fac.x @ w[fac.s])
        w[self.root_s] = self.root_g.T @ (self.root_g @ w[self.root_s])
        for fac in reversed(self.factors):
            tmp = fac.g.T @ w[fac.r]
            w[fac.s] += fac.x.T @ tmp
            w[fac.r] = tmp + fac.t.T @ w[fac.s]
        return w


def _box_geometry(coords: np.ndarray, spacing: float) -> tuple[np.ndarray, float]:
    center = 0.5 * (coords.max(axis=0) + coords.min(axis=0))
    halfw = np.maximum(0.5 * (coords.max(axis=0) - coords.min(axis=0)), 0.5 * spacing)
    return center, float(np.linalg.norm(halfw))


def factorize(
    op: KernelOperator,
    tree: BoxTree,
    eps: float,
    proxy: ProxyConfig | None = None,
) -> SkelFactor:
    """Compress-then-eliminate every box level by level, Cholesky the final
    Schur complement, and return the assembled factorization."""
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    proxy = proxy or ProxyConfig()
    start = time.perf_counter()
    dim = tree.dim
    unit_surface = proxy.surface(dim)
    coords = op.coords
    spacing = op.lattice_spacing
    owned = tree.owned
    factors: list[_BoxFactor] = []

    def local(idx: np.ndarray) -> np.ndarray:
        return np.searchsorted(owned, idx)

    for li, level in enumerate(tree.levels):
        for box in level:
            if box.diag is not None:
                continue
            if box.children:
                acts = [c.active for c in box.children]
                box.active = np.sort(np.concatenate(acts))
                diag = op.assemble_block(box.active, box.active)
                for child in box.children:
                    pos = np.searchsorted(box.active, child.active)
                    diag[np.ix_(pos, pos)] = child.schur
                    child.schur = None
                box.diag = diag
            else:
                box.diag = op.assemble_block(box.active, box.active)
        if len(level) == 1:
            break
        snapshot = np.sort(np.concatenate([b.active for b in level]))
        snapshot_coords = coords[snapshot]
        for box in level:
            p = box.active
            ext_mask = ~np.isin(snapshot, p, assume_unique=True)
            ext = snapshot[ext_mask]
            center, circumradius = _box_geometry(coords[p], spacing)
            radius = proxy.radius_factor * circumradius
            dist = np.linalg.norm(snapshot_coords[ext_mask] - center, axis=1)
            near = ext[dist <= radius]
            surface_pts = center + radius * unit_surface
            rows = op.kernel_rows(surface_pts, p)
            if near.size:
                rows = np.vstack([op.kernel_rows(coords[near], p), rows])
            ident = interpolative_decomposition(rows, eps)
            sl, rl, t = ident.skeleton, ident.redundant, ident.interp
            d = box.diag
            box.diag = None
            if rl.size == 0:
                box.schur = d
                continue
            drr = d[np.ix_(rl, rl)]
            drs = d[np.ix_(rl, sl)]
            dss = d[np.ix_(sl, sl)]
            brr = drr - drs @ t - t.T @ drs.T + t.T @ dss @ t
            bsr = drs.T - dss @ t
            try:
                g = cholesky(brr, context=f"level {li} box {box.cell}").g
            except NotPositiveDefinite as exc:
                raise NotPositiveDefinite(
                    f"redundant block of box {box.cell} at level {li} lost "
                    f"positive definiteness; reduce eps (currently {eps:g})"
                ) from exc
            x = sla.solve_triangular(
                g,
                sla.solve_triangular(g, bsr.T, trans="T", lower=False, check_finite=False),
                lower=False,
                check_finite=False,
            )
            box.schur = dss - bsr @ x
            factors.append(
                _BoxFactor(level=li, r=local(p[rl]), s=local(p[sl]), t=t, g=g, x=x)
            )
            box.active = p[sl]

    root = tree.levels[-1][0] if len(tree.levels[-1]) == 1 else None
    if root is None:
        raise RuntimeError("tree has no single root")
    d_root = root.diag if root.diag is not None else root.schur
    root.diag = None
    root.schur = None
    try:
        root_g = cholesky(d_root, context="root Schur complement").g
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            f"root Schur complement is not positive definite; reduce eps "
            f"(currently {eps:g})"
        ) from exc
    return SkelFactor(
        mode=tree.mode,
        eps=eps,
        owned=owned,
        factors=factors,
        root_s=local(root.active),
        root_g=root_g,
        t_factor=time.perf_counter() - start,
    )
