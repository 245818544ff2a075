"""Truncated SVD of sparse matrices by randomized subspace iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_core import SparseMatrix, dense_svd_small, qr_thin, spmm_dense, transpose

__all__ = ["TsvdParams", "TsvdResult", "truncated_svd", "sketch_rng"]


@dataclass(frozen=True)
class TsvdParams:
    """Target rank ``k`` plus sketch controls.

    ``oversampling`` extra columns are carried through the subspace iteration
    and discarded at the end; ``power_iters`` rounds of ``m @ m.T`` sharpen the
    sketch toward the dominant singular subspace.
    """

    k: int
    oversampling: int = 10
    power_iters: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.oversampling < 0 or self.power_iters < 0:
            raise ValueError("oversampling and power_iters must be non-negative")


@dataclass(frozen=True, eq=False)
class TsvdResult:
    u: np.ndarray  # rows x k
    s: np.ndarray  # k, non-increasing
    v: np.ndarray  # cols x k

    @property
    def k(self) -> int:
        return int(self.s.size)


def sketch_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; identical draws on every platform for a given seed."""
    return np.random.Generator(np.random.Philox(seed))


def truncated_svd(m: SparseMatrix, p: TsvdParams) -> TsvdResult:
    """Rank-``p.k`` SVD of a sparse matrix.

    Gaussian sketch, ``p.power_iters`` rounds of subspace iteration with a
    Householder re-orthonormalization after every half step, then an exact SVD
    of the projected ``(k + oversampling) x cols`` matrix.

    Each singular pair is sign-normalized so the largest-magnitude entry of the
    ``u`` column is positive. Output is bit-identical for identical inputs.
    """
    width = p.k + p.oversampling
    if width > min(m.rows, m.cols):
        raise ValueError(
            f"k + oversampling = {width} exceeds min dimension {min(m.rows, m.cols)}"
        )
    mt = transpose(m)
    omega = sketch_rng(p.seed).standard_normal((m.cols, width))
    y = spmm_dense(m, omega)
    for _ in range(p.power_iters):
        q, _ = qr_thin(y)
        z, _ = qr_thin(spmm_dense(mt, q))
        y = spmm_dense(m, z)
    q, _ = qr_thin(y)

    # b = q.T @ m, formed as (m.T @ q).T to stay in sparse-times-dense
    b = spmm_dense(mt, q).T
    ub, s, v = dense_svd_small(b)
    u = q @ ub[:, : p.k]
    s = s[: p.k].copy()
    v = v[:, : p.k].copy()

    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivot, np.arange(p.k)] < 0, -1.0, 1.0)
    u *= signs
    v *= signs
    return TsvdResult(np.ascontiguousarray(u), s, np.ascontiguousarray(v))
