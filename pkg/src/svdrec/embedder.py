"""Per-node embedding tables from truncated SVD factors."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .tsvd import TsvdResult

__all__ = [
    "EmbeddingTable",
    "ssb_embeddings",
    "tsa_embeddings",
    "node_embeddings",
    "build_embeddings",
]

METHODS = ("ssb", "tsa")


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Frozen SVD embeddings: ``user_rows`` is ``m x dim``, ``item_rows`` is ``n x dim``.

    ``method`` is ``"ssb"`` (one-hop) or ``"tsa"`` (one-hop and two-hop halves).
    """

    num_users: int
    num_items: int
    dim: int
    user_rows: np.ndarray
    item_rows: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.user_rows.shape != (self.num_users, self.dim):
            raise ValueError(f"user_rows shape {self.user_rows.shape} != {(self.num_users, self.dim)}")
        if self.item_rows.shape != (self.num_items, self.dim):
            raise ValueError(f"item_rows shape {self.item_rows.shape} != {(self.num_items, self.dim)}")
        if not (np.all(np.isfinite(self.user_rows)) and np.all(np.isfinite(self.item_rows))):
            raise ValueError("embedding table contains non-finite values")

    def node_rows(self) -> np.ndarray:
        """All rows in node order (users first, then items)."""
        return np.vstack([self.user_rows, self.item_rows])


def node_embeddings(f: TsvdResult) -> np.ndarray:
    """Rows of ``u @ diag(s)``, one per node."""
    return f.u * f.s


def ssb_embeddings(f: TsvdResult, m: int, n: int) -> EmbeddingTable:
    """One-hop table from the SVD of the normalized adjacency."""
    if f.u.shape[0] != m + n:
        raise ValueError(f"factor has {f.u.shape[0]} rows, expected {m + n} (users + items)")
    rows = node_embeddings(f)
    return EmbeddingTable(m, n, f.k, rows[:m].copy(), rows[m:].copy(), "ssb")


def tsa_embeddings(f1: TsvdResult, f2: TsvdResult, m: int, n: int) -> EmbeddingTable:
    """Two-hop table: per node, the SSB row from ``f1`` followed by the row from ``f2``.

    ``f1`` factors the normalized adjacency, ``f2`` its square; both must have
    the same rank, so ``dim = 2 * k``.
    """
    if f1.k != f2.k:
        raise ValueError(f"rank mismatch between hops: {f1.k} vs {f2.k}")
    for f in (f1, f2):
        if f.u.shape[0] != m + n:
            raise ValueError(f"factor has {f.u.shape[0]} rows, expected {m + n} (users + items)")
    rows = np.hstack([node_embeddings(f1), node_embeddings(f2)])
    return EmbeddingTable(m, n, 2 * f1.k, rows[:m].copy(), rows[m:].copy(), "tsa")


def build_embeddings(
    d,
    method: str,
    svd_dim: int,
    oversampling: int = 10,
    power_iters: int = 7,
    seed: int = 0,
    drop_tol: float = 0.0,
) -> tuple[EmbeddingTable, dict]:
    """Dataset to embedding table, returning wall-clock timings alongside.

    ``svd_dim`` is the final table width; for ``"tsa"`` it is split evenly
    between the one-hop and two-hop factorizations.
    """
    from .graph_pipeline import build_adjacency, laplacian_normalize, matrix_power2, symmetrize
    from .tsvd import TsvdParams, truncated_svd

    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "tsa" and svd_dim % 2:
        raise ValueError("tsa needs an even svd_dim (half per hop)")
    k = svd_dim if method == "ssb" else svd_dim // 2
    params = TsvdParams(k, oversampling, power_iters, seed)
    timings = {}

    t0 = time.perf_counter()
    a_norm = laplacian_normalize(symmetrize(build_adjacency(d)))
    f1 = truncated_svd(a_norm, params)
    timings["svd_hop1_seconds"] = time.perf_counter() - t0
    if method == "ssb":
        timings["svd_seconds"] = timings["svd_hop1_seconds"]
        return ssb_embeddings(f1, d.num_users, d.num_items), timings

    t0 = time.perf_counter()
    f2 = truncated_svd(matrix_power2(a_norm, drop_tol=drop_tol), params)
    timings["svd_hop2_seconds"] = time.perf_counter() - t0
    timings["svd_seconds"] = timings["svd_hop1_seconds"] + timings["svd_hop2_seconds"]
    return tsa_embeddings(f1, f2, d.num_users, d.num_items), timings
