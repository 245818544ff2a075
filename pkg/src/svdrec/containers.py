"""Checksummed binary container for matrices, embeddings, checkpoints and reports.

Layout (all integers little-endian)::

    magic     4 bytes  b"SVDA"
    version   u8
    kind      u8       1 sparse-matrix, 2 embedding-table, 3 model-checkpoint, 4 eval-report
    meta_len  u32
    meta      meta_len bytes of UTF-8 JSON (sorted keys)
    n_arrays  u32
    n_arrays times:
        name_len u16, name (UTF-8)
        dtype    u8   b"f" float64 or b"i" int64
        ndim     u8
        shape    ndim x u64
        data     prod(shape) x 8 bytes, little-endian, C order
    digest    32 bytes SHA-256 of everything above

Writes go through a temporary file and ``os.replace``, and contain nothing
time-dependent, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedder import EmbeddingTable
from .evaluator import EvalReport
from .matrix_core import SparseMatrix
from .scorer_model import ModelParams

__all__ = [
    "ContainerError",
    "Container",
    "KINDS",
    "write_container",
    "read_container",
    "save_sparse",
    "load_sparse",
    "save_embeddings",
    "load_embeddings",
    "save_params",
    "load_params",
    "save_report",
    "load_report",
]

MAGIC = b"SVDA"
VERSION = 1
KINDS = {"sparse-matrix": 1, "embedding-table": 2, "model-checkpoint": 3, "eval-report": 4}
_KIND_NAMES = {v: k for k, v in KINDS.items()}
_DTYPES = {b"f": np.dtype("<f8"), b"i": np.dtype("<i8")}


class ContainerError(ValueError):
    pass


@dataclass
class Container:
    kind: str
    meta: dict
    arrays: dict[str, np.ndarray]


def _encode(kind: str, arrays: dict[str, np.ndarray], meta: dict) -> bytes:
    if kind not in KINDS:
        raise ContainerError(f"unknown payload kind {kind!r}")
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<BBI", VERSION, KINDS[kind], len(meta_bytes)), meta_bytes]
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype.kind == "f":
            code, data = b"f", np.ascontiguousarray(arr, dtype="<f8")
        elif arr.dtype.kind in "iub":
            code, data = b"i", np.ascontiguousarray(arr, dtype="<i8")
        else:
            raise ContainerError(f"array {name!r}: unsupported dtype {arr.dtype}")
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)) + name_bytes)
        parts.append(code + struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(data.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def _decode(blob: bytes, source="<bytes>") -> Container:
    if len(blob) < 4 + 6 + 4 + 32 or blob[:4] != MAGIC:
        raise ContainerError(f"{source}: not an SVDA container")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ContainerError(f"{source}: checksum mismatch")
    version, kind_code, meta_len = struct.unpack_from("<BBI", body, 4)
    if version != VERSION:
        raise ContainerError(f"{source}: unsupported format version {version}")
    if kind_code not in _KIND_NAMES:
        raise ContainerError(f"{source}: unknown payload kind {kind_code}")
    pos = 10
    meta = json.loads(body[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (n_arrays,) = struct.unpack_from("<I", body, pos)
    pos += 4
    arrays = {}
    try:
        for _ in range(n_arrays):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos : pos + name_len].decode("utf-8")
            pos += name_len
            code = body[pos : pos + 1]
            (ndim,) = struct.unpack_from("<B", body, pos + 1)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}Q", body, pos)
            pos += 8 * ndim
            count = int(np.prod(shape, dtype=np.int64))
            if code not in _DTYPES or pos + 8 * count > len(body):
                raise ContainerError(f"{source}: array {name!r} is truncated or has a bad dtype")
            data = np.frombuffer(body, dtype=_DTYPES[code], count=count, offset=pos)
            arrays[name] = data.astype(data.dtype.newbyteorder("="), copy=True).reshape(shape)
            pos += 8 * count
    except struct.error as exc:
        raise ContainerError(f"{source}: truncated container") from exc
    if pos != len(body):
        raise ContainerError(f"{source}: trailing bytes after payload")
    return Container(_KIND_NAMES[kind_code], meta, arrays)


def write_container(path, kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = _encode(kind, arrays, meta or {})
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
    return path


def read_container(path, kind: str | None = None) -> Container:
    path = Path(path)
    c = _decode(path.read_bytes(), source=path)
    if kind is not None and c.kind != kind:
        raise ContainerError(f"{path}: expected a {kind} container, found {c.kind}")
    return c


def _require(c: Container, names, source) -> None:
    missing = [n for n in names if n not in c.arrays]
    if missing:
        raise ContainerError(f"{source}: missing arrays {missing}")


def save_sparse(path, m: SparseMatrix, meta: dict | None = None) -> Path:
    meta = dict(meta or {}, rows=m.rows, cols=m.cols, nnz=m.nnz)
    arrays = {"row_ptr": m.row_ptr, "col_idx": m.col_idx, "values": m.values}
    return write_container(path, "sparse-matrix", arrays, meta)


def load_sparse(path) -> tuple[SparseMatrix, dict]:
    c = read_container(path, "sparse-matrix")
    _require(c, ("row_ptr", "col_idx", "values"), path)
    m = SparseMatrix(c.meta["rows"], c.meta["cols"], c.arrays["row_ptr"], c.arrays["col_idx"], c.arrays["values"])
    if m.nnz != c.meta["nnz"]:
        raise ContainerError(f"{path}: declared nnz {c.meta['nnz']} != payload {m.nnz}")
    try:
        m.check()
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from exc
    return m, c.meta


def save_embeddings(path, e: EmbeddingTable, meta: dict | None = None) -> Path:
    meta = dict(meta or {}, num_users=e.num_users, num_items=e.num_items, dim=e.dim, method=e.method)
    return write_container(path, "embedding-table", {"user_rows": e.user_rows, "item_rows": e.item_rows}, meta)


def load_embeddings(path) -> tuple[EmbeddingTable, dict]:
    c = read_container(path, "embedding-table")
    _require(c, ("user_rows", "item_rows"), path)
    try:
        e = EmbeddingTable(
            c.meta["num_users"], c.meta["num_items"], c.meta["dim"],
            c.arrays["user_rows"], c.arrays["item_rows"], c.meta["method"],
        )
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from exc
    return e, c.meta


def save_params(path, p: ModelParams, meta: dict | None = None) -> Path:
    meta = dict(meta or {}, in_dim=p.in_dim, hidden=p.hidden, use_bias=p.use_bias)
    return write_container(path, "model-checkpoint", p.arrays(), meta)


def load_params(path) -> tuple[ModelParams, dict]:
    c = read_container(path, "model-checkpoint")
    _require(c, ("w1", "b1", "w2", "b2"), path)
    a = c.arrays
    try:
        p = ModelParams(a["w1"], a["b1"], a["w2"], a["b2"], use_bias=bool(c.meta["use_bias"]))
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from exc
    if (p.in_dim, p.hidden) != (c.meta["in_dim"], c.meta["hidden"]):
        raise ContainerError(f"{path}: declared dims do not match payload")
    return p, c.meta


def save_report(path, r: EvalReport, meta: dict | None = None) -> Path:
    meta = dict(meta or {}, k=r.k, users_evaluated=r.users_evaluated)
    return write_container(path, "eval-report", {"metrics": np.array([r.recall, r.ndcg])}, meta)


def load_report(path) -> tuple[EvalReport, dict]:
    c = read_container(path, "eval-report")
    _require(c, ("metrics",), path)
    recall, ndcg = (float(x) for x in c.arrays["metrics"])
    return EvalReport(int(c.meta["k"]), recall, ndcg, int(c.meta["users_evaluated"])), c.meta
