"""O(N log N) matvec with the d-level Toeplitz operator via circulant
embedding in a (2n)^dim periodic array and real FFTs."""

from __future__ import annotations

import numpy as np

from .kernel import KernelOperator


class ToeplitzMatvec:
    """Precomputed spectral symbol of the circulant embedding of A.

    The generator tensor (kernel over non-negative lags, diagonal at lag 0)
    is mirrored axis by axis into a (2n)^dim array; the hyperplanes at index
    n are never addressed by lags between two in-grid points and stay zero.
    """

    def __init__(self, op: KernelOperator):
        self.dim = op.grid.dim
        self.n = op.grid.n_per_dim
        n = self.n
        emb = np.zeros((2 * n,) * self.dim)
        emb[(slice(0, n),) * self.dim] = op.toeplitz_generator()
        for axis in range(self.dim):
            src = [slice(None)] * self.dim
            dst = [slice(None)] * self.dim
            src[axis] = slice(1, n)
            dst[axis] = slice(2 * n - 1, n, -1)
            emb[tuple(dst)] = emb[tuple(src)]
        self._emb_shape = emb.shape
        self._symbol = np.fft.rfftn(emb)

    @property
    def shape(self) -> tuple[int, int]:
        N = self.n**self.dim
        return (N, N)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        N = self.n**self.dim
        if v.shape != (N,):
            raise ValueError(f"expected vector of length {N}, got shape {v.shape}")
        pad = np.zeros(self._emb_shape)
        pad[(slice(0, self.n),) * self.dim] = v.reshape((self.n,) * self.dim)
        axes = tuple(range(self.dim))
        out = np.fft.irfftn(
            np.fft.rfftn(pad) * self._symbol, s=self._emb_shape, axes=axes
        )
        return out[(slice(0, self.n),) * self.dim].reshape(N)

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.matvec(v)


def build_matvec(op: KernelOperator) -> ToeplitzMatvec:
    return ToeplitzMatvec(op)
