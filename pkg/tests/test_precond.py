import numpy as np
import pytest

from iedd import geometry, kernel, precond
from iedd.linalg import NotPositiveDefinite


def setup(dim, n, m, kind, w=1, lattice=None):
    g = geometry.build_grid(dim, n)
    op = kernel.build_operator(g, lattice=lattice)
    d = geometry.build_decomposition(g, m, w, kind)
    return op, d


class TestIdentity:
    def test_passthrough(self, rng):
        pre = precond.identity(16)
        f = rng.standard_normal(16)
        assert np.array_equal(pre.apply(f), f)

    def test_dense_is_identity(self):
        assert np.array_equal(precond.identity(5).apply_dense(), np.eye(5))


class TestExactBackend:
    def test_single_subdomain_is_exact_solve(self, dense_cache, rng):
        op, a = dense_cache(2, 8)
        d = geometry.build_decomposition(op.grid, 1, 0, "jacobi")
        pre = precond.from_decomposition(op, d)
        f = rng.standard_normal(op.n)
        u = pre.apply(f)
        assert np.linalg.norm(a @ u - f) <= 1e-10 * np.linalg.norm(f)

    @pytest.mark.parametrize("kind", ["jacobi", "schwarz", "cbd"])
    def test_apply_symmetric_and_spd(self, rng, kind):
        op, d = setup(2, 16, 4, kind)
        pre = precond.from_decomposition(op, d)
        u = rng.standard_normal(op.n)
        v = rng.standard_normal(op.n)
        left = pre.apply(u) @ v
        right = u @ pre.apply(v)
        assert abs(left - right) <= 1e-10 * max(abs(left), abs(right))
        for _ in range(10):
            f = rng.standard_normal(op.n)
            assert f @ pre.apply(f) > 0

    def test_apply_linear(self, rng):
        op, d = setup(2, 16, 2, "schwarz")
        pre = precond.from_decomposition(op, d)
        u = rng.standard_normal(op.n)
        v = rng.standard_normal(op.n)
        lhs = pre.apply(0.7 * u + 3.0 * v)
        rhs = 0.7 * pre.apply(u) + 3.0 * pre.apply(v)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)

    def test_apply_dense_matches_apply(self, rng):
        op, d = setup(2, 8, 2, "cbd")
        pre = precond.from_decomposition(op, d)
        tinv = pre.apply_dense()
        f = rng.standard_normal(op.n)
        assert np.linalg.norm(tinv @ f - pre.apply(f)) <= 1e-12 * np.linalg.norm(f)

    def test_jacobi_block_structure(self):
        op, d = setup(2, 16, 4, "jacobi")
        pre = precond.from_decomposition(op, d)
        assert pre.n_subdomains == 16
        assert all(s.size == 16 for s in (sub for sub in d.subdomains))

    def test_dense_limit_enforced(self):
        op, d = setup(2, 16, 2, "schwarz")
        with pytest.raises(ValueError, match="rskel"):
            precond.from_decomposition(op, d, dense_limit=10)

    def test_length_check(self):
        op, d = setup(2, 8, 2, "jacobi")
        pre = precond.from_decomposition(op, d)
        with pytest.raises(ValueError):
            pre.apply(np.zeros(op.n - 1))


class TestProjectionProperties:
    def _projection(self, op, a, d, i):
        idx = d.subdomains[i]
        a_i = a[np.ix_(idx, idx)]
        inv = np.linalg.inv(a_i)

        def proj(v):
            out = np.zeros_like(v)
            out[idx] = inv @ (a @ v)[idx]
            return out

        return proj

    def test_idempotence(self, dense_cache, rng):
        op, a = dense_cache(2, 16)
        d = geometry.build_decomposition(op.grid, 2, 1, "schwarz")
        proj = self._projection(op, a, d, 0)
        for _ in range(3):
            v = rng.standard_normal(op.n)
            pv = proj(v)
            assert np.linalg.norm(proj(pv) - pv) <= 1e-8 * np.linalg.norm(v)

    def test_fixed_on_own_support(self, dense_cache, rng):
        op, a = dense_cache(2, 16)
        d = geometry.build_decomposition(op.grid, 2, 1, "schwarz")
        idx = d.subdomains[2]
        proj = self._projection(op, a, d, 2)
        v = np.zeros(op.n)
        v[idx] = rng.standard_normal(idx.size)
        assert np.linalg.norm(proj(v) - v) <= 1e-8 * np.linalg.norm(v)


class TestRskelBackend:
    def test_cbd_matches_exact(self, rng):
        op, d = setup(2, 32, 4, "cbd")
        exact = precond.from_decomposition(op, d, backend="exact")
        approx = precond.from_decomposition(op, d, backend="rskel", eps=1e-9)
        f = rng.standard_normal(op.n)
        ue, ua = exact.apply(f), approx.apply(f)
        assert np.linalg.norm(ua - ue) <= 1e-6 * np.linalg.norm(ue)

    def test_dense_materialization_rejected(self):
        op, d = setup(2, 32, 4, "cbd")
        pre = precond.from_decomposition(op, d, backend="rskel")
        with pytest.raises(ValueError, match="exact"):
            pre.apply_dense()

    def test_bad_backend(self):
        op, d = setup(2, 8, 2, "cbd")
        with pytest.raises(ValueError, match="backend"):
            precond.from_decomposition(op, d, backend="qr")


class TestMirroredSharing:
    @pytest.mark.parametrize("dim,n,m", [(2, 16, 4), (3, 8, 2)])
    def test_matches_unshared(self, rng, dim, n, m):
        op, d = setup(dim, n, m, "cbd")
        plain = precond.from_decomposition(op, d)
        shared = precond.from_decomposition(op, d, share_mirrored_subdomains=True)
        f = rng.standard_normal(op.n)
        assert np.linalg.norm(plain.apply(f) - shared.apply(f)) <= 1e-11 * np.linalg.norm(f)

    def test_memory_shrinks(self):
        op, d = setup(2, 16, 4, "cbd")
        plain = precond.from_decomposition(op, d)
        shared = precond.from_decomposition(op, d, share_mirrored_subdomains=True)
        assert shared.stats()["memory_bytes"] < 0.5 * plain.stats()["memory_bytes"]


class TestRsGlobal:
    def test_acts_as_approximate_inverse(self, dense_cache, rng):
        op, a = dense_cache(2, 16)
        part = geometry.build_partitioning(op.grid, 4)
        pre = precond.rs_global(op, part, eps=1e-9)
        f = rng.standard_normal(op.n)
        u = pre.apply(f)
        assert np.linalg.norm(a @ u - f) <= 1e-5 * np.linalg.norm(f)

    def test_stats(self):
        op = kernel.build_operator(geometry.build_grid(2, 32))
        part = geometry.build_partitioning(op.grid, 8)
        pre = precond.rs_global(op, part)
        stats = pre.stats()
        assert stats["S"] > 0 and stats["memory_bytes"] > 0
        assert pre.t_factor > 0
