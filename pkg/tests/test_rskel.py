import numpy as np
import pytest

from iedd import geometry, kernel
from iedd.linalg import NotPositiveDefinite
from iedd.rskel import COLORED, GLOBAL, ProxyConfig, build_tree, factorize


def global_setup(n, m, lattice=None):
    op = kernel.build_operator(geometry.build_grid(2, n), lattice=lattice)
    part = geometry.build_partitioning(op.grid, m)
    return op, build_tree(part)


class TestProxyConfig:
    def test_defaults(self):
        p = ProxyConfig()
        assert p.radius_factor == 1.5
        assert p.points_2d == 64
        assert p.points_3d == 288

    def test_surface_shapes(self):
        p = ProxyConfig()
        circle = p.surface(2)
        assert circle.shape == (64, 2)
        assert np.allclose(np.linalg.norm(circle, axis=1), 1.0)
        sphere = p.surface(3)
        assert sphere.shape == (288, 3)
        assert np.allclose(np.linalg.norm(sphere, axis=1), 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ProxyConfig(radius_factor=0.9)
        with pytest.raises(ValueError):
            ProxyConfig(points_2d=4)


class TestTreeShapes:
    def test_global_quadtree_depth(self):
        _, tree = global_setup(16, 4)
        assert tree.mode == GLOBAL
        assert [len(level) for level in tree.levels] == [16, 4, 1]

    def test_colored_two_levels(self):
        g = geometry.build_grid(2, 32)
        d = geometry.build_decomposition(g, 4, 1, "cbd")
        tree = build_tree(d, subdomain=0)
        assert tree.mode == COLORED
        assert [len(level) for level in tree.levels] == [4, 1]

    def test_colored_3d(self):
        g = geometry.build_grid(3, 16)
        d = geometry.build_decomposition(g, 4, 1, "cbd")
        tree = build_tree(d, subdomain=3)
        assert [len(level) for level in tree.levels] == [8, 1]

    def test_single_region_subdomain(self):
        g = geometry.build_grid(2, 16)
        d = geometry.build_decomposition(g, 2, 1, "schwarz")
        tree = build_tree(d, subdomain=1)
        assert [len(level) for level in tree.levels] == [1]
        assert np.array_equal(tree.owned, d.subdomains[1])

    def test_leaves_partition_owned(self):
        g = geometry.build_grid(2, 32)
        d = geometry.build_decomposition(g, 8, 1, "cbd")
        tree = build_tree(d, subdomain=2)
        leaf_union = np.sort(np.concatenate([b.active for b in tree.levels[0]]))
        assert np.array_equal(leaf_union, tree.owned)

    def test_non_power_of_two_rejected(self):
        g = geometry.build_grid(2, 12)
        with pytest.raises(ValueError, match="power of 2"):
            build_tree(geometry.build_partitioning(g, 3))
        d = geometry.build_decomposition(g, 6, 1, "cbd")
        with pytest.raises(ValueError, match="power of 2"):
            build_tree(d, subdomain=0)

    def test_colored_needs_subdomain(self):
        g = geometry.build_grid(2, 16)
        d = geometry.build_decomposition(g, 4, 1, "cbd")
        with pytest.raises(ValueError, match="subdomain"):
            build_tree(d)

    def test_overlapping_regions_rejected(self):
        # block width 2 with overlap 1 makes same-color extensions touch
        g = geometry.build_grid(2, 8)
        d = geometry.build_decomposition(g, 4, 2, "cbd")
        with pytest.raises(ValueError, match="overlap"):
            build_tree(d, subdomain=0)


class TestFactorization:
    def test_near_exact_limit(self, dense_cache, rng):
        op, a = dense_cache(2, 8)
        tree = build_tree(geometry.build_partitioning(op.grid, 2))
        fac = factorize(op, tree, 1e-15)
        for _ in range(3):
            v = rng.standard_normal(op.n)
            err = np.linalg.norm(fac.apply_inverse(a @ v) - v)
            assert err <= 1e-10 * np.linalg.norm(v)

    def test_zero_rhs(self):
        op, tree = global_setup(16, 4)
        fac = factorize(op, tree, 1e-6)
        assert np.all(fac.apply_inverse(np.zeros(op.n)) == 0)

    def test_linearity(self, rng):
        op, tree = global_setup(16, 4)
        fac = factorize(op, tree, 1e-6)
        u = rng.standard_normal(op.n)
        v = rng.standard_normal(op.n)
        lhs = fac.apply_inverse(1.5 * u - 2.0 * v)
        rhs = 1.5 * fac.apply_inverse(u) - 2.0 * fac.apply_inverse(v)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)

    def test_length_mismatch(self):
        op, tree = global_setup(16, 4)
        fac = factorize(op, tree, 1e-6)
        with pytest.raises(ValueError):
            fac.apply_inverse(np.zeros(op.n + 1))

    def test_forward_consistency(self, dense_cache, rng):
        op, a = dense_cache(2, 16)
        tree = build_tree(geometry.build_partitioning(op.grid, 4))
        eps = 1e-3
        fac = factorize(op, tree, eps)
        norm_a = np.linalg.norm(a, 2)
        for _ in range(5):
            v = rng.standard_normal(op.n)
            err = np.linalg.norm(fac.apply(v) - a @ v)
            assert err <= 100 * eps * norm_a * np.linalg.norm(v)

    def test_symmetry_of_apply(self, rng):
        op, tree = global_setup(16, 4)
        fac = factorize(op, tree, 1e-6)
        u = rng.standard_normal(op.n)
        v = rng.standard_normal(op.n)
        left = fac.apply(u) @ v
        right = u @ fac.apply(v)
        assert abs(left - right) <= 1e-12 * max(abs(left), abs(right))

    def test_inverse_apply_spd(self, rng):
        op, tree = global_setup(16, 4)
        fac = factorize(op, tree, 1e-3)
        for _ in range(50):
            f = rng.standard_normal(op.n)
            assert f @ fac.apply_inverse(f) > 0

    def test_accuracy_tracks_eps(self, dense_cache, rng):
        op, a = dense_cache(2, 16)
        tree_part = geometry.build_partitioning(op.grid, 4)
        errs = []
        for eps in (1e-3, 1e-6, 1e-9):
            fac = factorize(op, build_tree(tree_part), eps)
            worst = 0.0
            for _ in range(5):
                v = rng.standard_normal(op.n)
                worst = max(
                    worst,
                    np.linalg.norm(fac.apply_inverse(a @ v) - v)
                    / np.linalg.norm(v),
                )
            errs.append(worst)
            assert worst <= 100 * eps
        assert errs[0] > errs[1] > errs[2]

    def test_colored_matches_dense_subdomain_solve(self, rng):
        g = geometry.build_grid(2, 32)
        op = kernel.build_operator(g)
        d = geometry.build_decomposition(g, 4, 1, "cbd")
        tree = build_tree(d, subdomain=0)
        fac = factorize(op, tree, 1e-12)
        idx = tree.owned
        a_sub = op.assemble_block(idx, idx)
        rhs = rng.standard_normal(idx.size)
        direct = np.linalg.solve(a_sub, rhs)
        approx = fac.apply_inverse(rhs)
        assert np.linalg.norm(approx - direct) <= 1e-8 * np.linalg.norm(direct)

    def test_single_box_tree_is_dense_solve(self, rng):
        g = geometry.build_grid(2, 16)
        op = kernel.build_operator(g)
        d = geometry.build_decomposition(g, 2, 1, "schwarz")
        tree = build_tree(d, subdomain=0)
        fac = factorize(op, tree, 1e-3)
        assert fac.root_size == tree.owned.size
        idx = tree.owned
        rhs = rng.standard_normal(idx.size)
        direct = np.linalg.solve(op.assemble_block(idx, idx), rhs)
        assert np.allclose(fac.apply_inverse(rhs), direct, atol=1e-10)

    def test_bad_eps(self):
        op, tree = global_setup(16, 4)
        with pytest.raises(ValueError):
            factorize(op, tree, 0.0)


class TestStatsAndRanks:
    def test_stats_fields(self):
        op, tree = global_setup(32, 8)
        fac = factorize(op, tree, 1e-3)
        stats = fac.stats()
        assert stats["S"] == fac.root_size > 0
        assert stats["memory_bytes"] > 0
        assert stats["t_factor"] > 0

    def test_colored_leaf_rank_independent_of_problem_size(self):
        # fixed N/M: leaf ranks stay put as the problem grows
        ranks = []
        for n, m in ((64, 16), (128, 32)):
            g = geometry.build_grid(2, n)
            op = kernel.build_operator(g)
            d = geometry.build_decomposition(g, m, 1, "cbd")
            fac = factorize(op, build_tree(d, subdomain=0), 1e-3)
            leaf_ranks = [f.s.size for f in fac.factors if f.level == 0]
            ranks.append(max(leaf_ranks))
        assert abs(ranks[0] - ranks[1]) <= 3

    def test_global_leaf_rank_grows_with_block_size(self):
        # leaf rank ~ (N/M)^{1/2} in 2D: quadrupling N/M doubles the rank
        maxes = []
        for m in (8, 4):  # leaf sizes 64 and 256 points at n = 64
            op, tree = global_setup(64, m)
            factorize(op, tree, 1e-6)
            maxes.append(max(b.active.size for b in tree.levels[0]))
        ratio = maxes[1] / maxes[0]
        assert 1.4 <= ratio <= 2.8
