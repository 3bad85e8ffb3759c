import numpy as np
import pytest

from iedd import geometry, kernel
from iedd.toeplitz import ToeplitzMatvec, build_matvec


def test_embedding_size():
    op = kernel.build_operator(geometry.build_grid(2, 2), lattice=kernel.CELL)
    tm = ToeplitzMatvec(op)
    assert tm._emb_shape == (4, 4)


def test_symbol_dc_component():
    op = kernel.build_operator(geometry.build_grid(2, 4))
    tm = ToeplitzMatvec(op)
    gen = op.toeplitz_generator()
    n = op.grid.n_per_dim
    # DC mode = sum of the embedded array = mirrored-generator sum
    mirror_weights = np.ones((n, n))
    mirror_weights[1:, :] *= 1  # lag 0 rows counted once
    total = 0.0
    for i in range(n):
        for j in range(n):
            w = (2 if i > 0 else 1) * (2 if j > 0 else 1)
            total += w * gen[i, j]
    assert tm._symbol[0, 0].real == pytest.approx(total, rel=1e-13)


def test_zero_maps_to_zero():
    op = kernel.build_operator(geometry.build_grid(2, 8))
    tm = ToeplitzMatvec(op)
    assert np.all(tm.matvec(np.zeros(64)) == 0)


def test_first_basis_vector_gives_first_column(dense_cache):
    op, a = dense_cache(2, 8)
    tm = ToeplitzMatvec(op)
    e1 = np.zeros(64)
    e1[0] = 1.0
    assert np.linalg.norm(tm.matvec(e1) - a[:, 0]) <= 1e-14 * np.linalg.norm(a[:, 0])


@pytest.mark.parametrize(
    "dim,n,lattice",
    [(2, 8, None), (2, 32, None), (2, 16, kernel.CELL), (3, 8, None), (1, 16, None)],
)
def test_matches_dense(dense_cache, rng, dim, n, lattice):
    op, a = dense_cache(dim, n, lattice)
    tm = ToeplitzMatvec(op)
    for _ in range(5):
        v = rng.standard_normal(op.n)
        ref = a @ v
        assert np.linalg.norm(tm.matvec(v) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_symmetry_inner_product(rng):
    op = kernel.build_operator(geometry.build_grid(2, 16))
    tm = ToeplitzMatvec(op)
    for _ in range(5):
        u = rng.standard_normal(op.n)
        v = rng.standard_normal(op.n)
        left = tm.matvec(u) @ v
        right = u @ tm.matvec(v)
        assert abs(left - right) <= 1e-12 * max(abs(left), abs(right))


def test_linearity(rng):
    op = kernel.build_operator(geometry.build_grid(3, 4))
    tm = build_matvec(op)
    u = rng.standard_normal(op.n)
    v = rng.standard_normal(op.n)
    lhs = tm.matvec(2.5 * u - 0.3 * v)
    rhs = 2.5 * tm.matvec(u) - 0.3 * tm.matvec(v)
    assert np.linalg.norm(lhs - rhs) <= 1e-13 * np.linalg.norm(lhs)


def test_length_mismatch():
    op = kernel.build_operator(geometry.build_grid(2, 8))
    tm = ToeplitzMatvec(op)
    with pytest.raises(ValueError, match="length"):
        tm.matvec(np.zeros(63))


def test_matmul_operator(rng):
    op = kernel.build_operator(geometry.build_grid(2, 8))
    tm = ToeplitzMatvec(op)
    v = rng.standard_normal(64)
    assert np.array_equal(tm @ v, tm.matvec(v))
