"""User-item interaction data and the normalized bipartite adjacency matrices.

Node numbering in every square matrix: users are ``0 .. m-1``, items are
``m .. m+n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from os import PathLike

import numpy as np

from .matrix_core import SparseMatrix, spmm

__all__ = [
    "ParseError",
    "InteractionDataset",
    "parse_interaction_file",
    "load_dataset",
    "build_adjacency",
    "symmetrize",
    "degree_vector",
    "laplacian_normalize",
    "matrix_power2",
]


class ParseError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        super().__init__(f"{path}:{line_no}: {msg}")
        self.path = path
        self.line_no = line_no


@dataclass(eq=False)
class InteractionDataset:
    """Per-user train/test item lists (sorted, duplicate-free, disjoint)."""

    num_users: int
    num_items: int
    train: list[np.ndarray]
    test: list[np.ndarray]

    def __post_init__(self):
        if len(self.train) != self.num_users or len(self.test) != self.num_users:
            raise ValueError("train/test must hold one entry per user")
        for u in range(self.num_users):
            for name, items in (("train", self.train[u]), ("test", self.test[u])):
                if items.size and (items[0] < 0 or items[-1] >= self.num_items):
                    raise ValueError(f"user {u}: {name} item id out of range")
                if np.any(np.diff(items) <= 0):
                    raise ValueError(f"user {u}: {name} items must be sorted and unique")
            if np.intersect1d(self.train[u], self.test[u]).size:
                raise ValueError(f"user {u}: train and test items overlap")

    @classmethod
    def from_lists(cls, train, test, num_users=None, num_items=None) -> InteractionDataset:
        """Build from per-user iterables of item ids (or ``{user: items}`` dicts)."""
        train = _as_user_map(train)
        test = _as_user_map(test)
        users = set(train) | set(test)
        if num_users is None:
            num_users = max(users) + 1 if users else 0
        if num_items is None:
            top = [int(v.max()) for v in (*train.values(), *test.values()) if v.size]
            num_items = max(top) + 1 if top else 0
        empty = np.zeros(0, dtype=np.int64)
        return cls(
            num_users,
            num_items,
            [train.get(u, empty) for u in range(num_users)],
            [test.get(u, empty) for u in range(num_users)],
        )

    @property
    def num_train(self) -> int:
        return sum(int(t.size) for t in self.train)

    @property
    def num_test(self) -> int:
        return sum(int(t.size) for t in self.test)

    def train_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(user, item) arrays of all train interactions, user-major."""
        users = np.repeat(np.arange(self.num_users), [t.size for t in self.train])
        items = np.concatenate(self.train) if self.num_users else np.zeros(0, dtype=np.int64)
        return users.astype(np.int64), items.astype(np.int64)


def _as_user_map(lists) -> dict[int, np.ndarray]:
    if isinstance(lists, dict):
        pairs = lists.items()
    else:
        pairs = enumerate(lists)
    return {int(u): np.unique(np.asarray(list(v), dtype=np.int64)) for u, v in pairs}


def parse_interaction_file(path: str | PathLike) -> dict[int, np.ndarray]:
    """Read an NGCF-style file: one line per user, ``<user> <item> <item> ...``.

    Items are deduplicated and sorted. A user line with no items is kept as an
    empty array. Raises :class:`ParseError` (with the line number) on a
    non-integer or negative token, or when a user id appears twice.
    """
    out: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                ids = [int(tok) for tok in tokens]
            except ValueError:
                bad = next(t for t in tokens if not t.lstrip("-").isdigit())
                raise ParseError(path, line_no, f"malformed token {bad!r}") from None
            if min(ids) < 0:
                raise ParseError(path, line_no, "negative id")
            user = ids[0]
            if user in out:
                raise ParseError(path, line_no, f"user {user} appears twice")
            out[user] = np.unique(np.asarray(ids[1:], dtype=np.int64))
    return out


def load_dataset(train_path, test_path) -> InteractionDataset:
    """Parse a train/test file pair; id ranges cover both files."""
    return InteractionDataset.from_lists(
        parse_interaction_file(train_path), parse_interaction_file(test_path)
    )


def build_adjacency(d: InteractionDataset) -> SparseMatrix:
    """Binary ``num_users x num_items`` matrix of train interactions."""
    users, items = d.train_pairs()
    return SparseMatrix.from_coo(users, items, (d.num_users, d.num_items), duplicates="max")


def symmetrize(a: SparseMatrix) -> SparseMatrix:
    """``[[0, a], [a.T, 0]]`` as an ``(m+n) x (m+n)`` matrix."""
    m, n = a.shape
    r = a.row_indices()
    c = a.col_idx
    rows = np.concatenate([r, c + m])
    cols = np.concatenate([c + m, r])
    vals = np.concatenate([a.values, a.values])
    return SparseMatrix.from_coo(rows, cols, (m + n, m + n), vals)


def degree_vector(a_sym: SparseMatrix) -> np.ndarray:
    """Row sums of the symmetric adjacency (integer counts for binary input)."""
    return np.bincount(a_sym.row_indices(), weights=a_sym.values, minlength=a_sym.rows)


def laplacian_normalize(a_sym: SparseMatrix) -> SparseMatrix:
    """``D^-1/2 A D^-1/2`` with zero-degree nodes left as all-zero rows/cols."""
    if a_sym.rows != a_sym.cols:
        raise ValueError("laplacian_normalize expects a square matrix")
    if np.any(a_sym.values < 0):
        raise ValueError("laplacian_normalize expects non-negative entries")
    deg = degree_vector(a_sym)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    # one product per (x, y) pair, commutative in IEEE arithmetic, so the
    # result is exactly symmetric whenever the input is
    scale = inv_sqrt[a_sym.row_indices()] * inv_sqrt[a_sym.col_idx]
    return SparseMatrix(a_sym.rows, a_sym.cols, a_sym.row_ptr, a_sym.col_idx, a_sym.values * scale)


def matrix_power2(a_norm: SparseMatrix, drop_tol: float = 0.0) -> SparseMatrix:
    """Exact square of a square sparse matrix (two-hop propagation)."""
    if a_norm.rows != a_norm.cols:
        raise ValueError("matrix_power2 expects a square matrix")
    return spmm(a_norm, a_norm, drop_tol=drop_tol)
