"""CSR sparse matrices and the dense kernels used by the SVD pipeline.

Dense matrices are plain 2-D ``float64`` numpy arrays. Sparse products are
delegated to ``scipy.sparse`` and re-canonicalized into :class:`SparseMatrix`
(sorted column indices, no duplicates, no stored zeros).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "transpose",
    "spmm",
    "spmm_dense",
    "qr_thin",
    "dense_svd_small",
]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Real matrix in compressed sparse row form.

    ``row_ptr`` has ``rows + 1`` offsets into ``col_idx``/``values``. Column
    indices are strictly increasing inside each row and no stored value is 0.
    Use :meth:`from_coo`, :meth:`from_dense` or :meth:`from_scipy` rather than
    the raw constructor unless the arrays are already canonical.
    """

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        object.__setattr__(self, "row_ptr", np.ascontiguousarray(self.row_ptr, dtype=np.int64))
        object.__setattr__(self, "col_idx", np.ascontiguousarray(self.col_idx, dtype=np.int64))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def T(self) -> SparseMatrix:
        return transpose(self)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.rows, dtype=np.int64), np.diff(self.row_ptr))

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def check(self) -> None:
        """Raise ``ValueError`` if any CSR invariant is violated."""
        rp, ci, v = self.row_ptr, self.col_idx, self.values
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimension")
        if rp.shape != (self.rows + 1,):
            raise ValueError(f"row_ptr has length {rp.size}, expected {self.rows + 1}")
        if rp[0] != 0 or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must start at 0 and be non-decreasing")
        if rp[-1] != v.size or ci.size != v.size:
            raise ValueError("row_ptr[-1], len(col_idx) and len(values) disagree")
        if v.size:
            if ci.min() < 0 or ci.max() >= self.cols:
                raise ValueError("column index out of range")
            # strictly increasing within a row: every step not at a row start must be positive
            steps = np.diff(ci)
            row_start = np.zeros(v.size, dtype=bool)
            row_start[rp[:-1][np.diff(rp) > 0]] = True
            if np.any(steps[~row_start[1:]] <= 0):
                raise ValueError("column indices must be strictly increasing within each row")
            if np.any(v == 0):
                raise ValueError("explicit zero stored")
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite value stored")

    @classmethod
    def from_coo(cls, rows, cols, shape, values=None, *, duplicates: str = "sum") -> SparseMatrix:
        """Build a canonical CSR matrix from coordinate triplets.

        ``duplicates`` is ``"sum"`` (add repeated coordinates) or ``"max"``
        (keep one copy; used for binary adjacency).
        """
        m, n = (int(shape[0]), int(shape[1]))
        r = np.asarray(rows, dtype=np.int64).ravel()
        c = np.asarray(cols, dtype=np.int64).ravel()
        if values is None:
            v = np.ones(r.size, dtype=np.float64)
        else:
            v = np.asarray(values, dtype=np.float64).ravel()
        if not (r.size == c.size == v.size):
            raise ValueError("rows, cols and values must have equal length")
        if r.size and (r.min() < 0 or r.max() >= m or c.min() < 0 or c.max() >= n):
            raise ValueError("coordinate out of range for shape %r" % ((m, n),))

        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size:
            first = np.ones(r.size, dtype=bool)
            first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            starts = np.flatnonzero(first)
            if duplicates == "sum":
                v = np.add.reduceat(v, starts)
            elif duplicates == "max":
                v = np.maximum.reduceat(v, starts)
            else:
                raise ValueError(f"unknown duplicates policy {duplicates!r}")
            r, c = r[starts], c[starts]
            keep = v != 0
            r, c, v = r[keep], c[keep], v[keep]
        row_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=m), out=row_ptr[1:])
        return cls(m, n, row_ptr, c, v)

    @classmethod
    def from_dense(cls, a) -> SparseMatrix:
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a.shape, a[r, c])

    @classmethod
    def from_scipy(cls, a, drop_tol: float = 0.0) -> SparseMatrix:
        a = sp.csr_matrix(a, dtype=np.float64, copy=True)
        a.sum_duplicates()
        a.sort_indices()
        if drop_tol > 0:
            a.data[np.abs(a.data) <= drop_tol] = 0.0
        a.eliminate_zeros()
        return cls(a.shape[0], a.shape[1], a.indptr, a.indices, a.data)

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        idx = np.arange(n)
        return cls.from_coo(idx, idx, (n, n))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def equals(self, other: SparseMatrix) -> bool:
        """Structural and bitwise equality."""
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def transpose(m: SparseMatrix) -> SparseMatrix:
    """Return ``m`` transposed, in canonical CSR form."""
    t = m.to_scipy().T.tocsr()
    return SparseMatrix.from_scipy(t)


def spmm(a: SparseMatrix, b: SparseMatrix, drop_tol: float = 0.0) -> SparseMatrix:
    """Sparse-sparse product ``a @ b``.

    Entries with ``|value| <= drop_tol`` are removed; the default keeps every
    structurally nonzero entry (exact product), dropping only exact zeros.
    """
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    if drop_tol < 0:
        raise ValueError("drop_tol must be non-negative")
    return SparseMatrix.from_scipy(a.to_scipy() @ b.to_scipy(), drop_tol=drop_tol)


def spmm_dense(a: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``a @ b`` returned as a dense array."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or a.cols != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return np.asarray(a.to_scipy() @ b)


def qr_thin(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization by Householder reflections.

    For an ``m x n`` input with ``m >= n`` returns ``q`` (``m x n``, orthonormal
    columns) and ``r`` (``n x n``, upper triangular, non-negative diagonal).
    ``q`` stays orthonormal even when ``a`` is rank deficient.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    m, n = a.shape
    if m < n:
        raise ValueError(f"qr_thin needs rows >= cols, got {a.shape}")

    r = np.array(a, order="F", copy=True)
    reflectors = []
    for j in range(n):
        x = r[j:, j]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            reflectors.append(None)
            continue
        v = x.copy()
        v[0] += normx if x[0] >= 0 else -normx
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append(v)

    # q = H_0 H_1 ... H_{n-1} [I_n; 0], applied back to front
    q = np.zeros((m, n), order="F")
    q[np.arange(n), np.arange(n)] = 1.0
    for j in range(n - 1, -1, -1):
        v = reflectors[j]
        if v is not None:
            q[j:, j:] -= 2.0 * np.outer(v, v @ q[j:, j:])

    r = np.triu(r[:n, :])
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q *= signs
    r *= signs[:, None]
    return np.ascontiguousarray(q), r


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # circle-method tournament: every pair (p, q) with p < q appears exactly once
    # across n-1 rounds (n even); pairs within a round are disjoint
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi_orthogonalize(w: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    """One-sided (Hestenes) Jacobi: rotate columns of ``w`` in place until
    mutually orthogonal; returns the accumulated rotation ``v`` (``w_in @ v = w_out``)."""
    n = w.shape[1]
    v = np.eye(n)
    if n < 2:
        return v
    size = n + (n % 2)
    rounds = [
        (p[q < n], q[q < n]) for p, q in _round_robin(size)
    ]
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            if p.size == 0:
                continue
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            wp, wq = wp[:, active], wq[:, active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            return v
    raise np.linalg.LinAlgError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def dense_svd_small(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """SVD of a small (or short-and-wide) dense matrix by one-sided Jacobi.

    Returns ``u`` (``r x r``), ``s`` (length ``r``, non-increasing) and ``v``
    (``c x r``) with ``a = u @ diag(s) @ v.T`` for ``a`` of shape ``r x c``,
    ``r <= c``. A tall input is handled by factoring its transpose.

    The wide matrix is first reduced by a Householder QR of ``a.T`` so the
    Jacobi sweeps run on an ``r x r`` triangle.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("dense_svd_small: input contains non-finite values")
    r_, c_ = a.shape
    if r_ > c_:
        u, s, v = dense_svd_small(a.T, tol=tol, max_sweeps=max_sweeps)
        return v, s, u
    if r_ == 0:
        return np.zeros((0, 0)), np.zeros(0), np.zeros((c_, 0))

    qa, ra = qr_thin(a.T)               # a.T = qa @ ra, ra is r x r
    w = np.array(ra, order="F")
    rot = _jacobi_orthogonalize(w, tol, max_sweeps)   # ra @ rot = w
    s = np.linalg.norm(w, axis=0)
    order = np.argsort(-s, kind="stable")
    s, w, rot = s[order], w[:, order], rot[:, order]

    # left factor of ra: w / s, completed to an orthonormal basis where s ~ 0
    scale = s[0] if s[0] > 0 else 1.0
    good = s > scale * r_ * np.finfo(float).eps
    ngood = int(good.sum())
    uw = np.zeros((r_, r_))
    uw[:, :ngood] = w[:, :ngood] / s[:ngood]
    if ngood < r_:
        filler = np.random.Generator(np.random.Philox(r_)).standard_normal((r_, r_ - ngood))
        basis, _ = qr_thin(np.hstack([uw[:, :ngood], filler]))
        uw[:, ngood:] = basis[:, ngood:]
    # a.T = qa @ uw @ diag(s) @ rot.T  =>  a = rot @ diag(s) @ (qa @ uw).T
    return rot, s, qa @ uw
