import struct

import numpy as np
import pytest

from svdrec import containers
from svdrec.embedder import EmbeddingTable
from svdrec.evaluator import EvalReport
from svdrec.scorer_model import init_params

from conftest import random_sparse


def test_sparse_round_trip(tmp_path, rng):
    m = random_sparse(rng, 20, 13, 0.3)
    containers.save_sparse(tmp_path / "m.svda", m, {"note": "x"})
    back, meta = containers.load_sparse(tmp_path / "m.svda")
    assert back.equals(m) and meta["note"] == "x" and meta["nnz"] == m.nnz


def test_embedding_round_trip(tmp_path, rng):
    e = EmbeddingTable(3, 4, 2, rng.standard_normal((3, 2)), rng.standard_normal((4, 2)), "tsa")
    containers.save_embeddings(tmp_path / "e.svda", e)
    back, _ = containers.load_embeddings(tmp_path / "e.svda")
    assert back.method == "tsa" and back.dim == 2
    assert back.user_rows.tobytes() == e.user_rows.tobytes()
    assert back.item_rows.tobytes() == e.item_rows.tobytes()


def test_params_and_report_round_trip(tmp_path):
    p = init_params(5, 3, seed=2, use_bias=False)
    containers.save_params(tmp_path / "p.svda", p)
    back, meta = containers.load_params(tmp_path / "p.svda")
    assert back.allclose(p, rtol=0, atol=0) and back.use_bias is False and meta["hidden"] == 3
    r = EvalReport(20, 0.0657, 0.0542, 31668)
    containers.save_report(tmp_path / "r.svda", r, {"method": "tsa"})
    got, meta = containers.load_report(tmp_path / "r.svda")
    assert got == r and meta["method"] == "tsa"


def test_layout_is_little_endian_with_header(tmp_path):
    path = containers.write_container(tmp_path / "x.svda", "eval-report", {"metrics": np.array([0.5, 0.25])}, {})
    blob = path.read_bytes()
    assert blob[:4] == b"SVDA"
    version, kind, meta_len = struct.unpack_from("<BBI", blob, 4)
    assert (version, kind) == (1, containers.KINDS["eval-report"])
    assert np.frombuffer(blob[-32 - 16 : -32], dtype="<f8").tolist() == [0.5, 0.25]


def test_identical_inputs_identical_bytes(tmp_path, rng):
    m = random_sparse(rng, 10, 10, 0.4)
    a = containers.save_sparse(tmp_path / "a.svda", m, {"b": 1, "a": 2})
    b = containers.save_sparse(tmp_path / "b.svda", m, {"a": 2, "b": 1})
    assert a.read_bytes() == b.read_bytes()


def test_corruption_detected(tmp_path, rng):
    path = containers.save_sparse(tmp_path / "m.svda", random_sparse(rng, 8, 8, 0.5))
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(containers.ContainerError, match="checksum"):
        containers.load_sparse(path)


def test_wrong_kind_and_garbage(tmp_path):
    path = containers.save_params(tmp_path / "p.svda", init_params(2, 2))
    with pytest.raises(containers.ContainerError, match="expected a sparse-matrix"):
        containers.load_sparse(path)
    (tmp_path / "g.svda").write_bytes(b"not a container at all, definitely not" * 2)
    with pytest.raises(containers.ContainerError, match="not an SVDA"):
        containers.read_container(tmp_path / "g.svda")


def test_declared_dims_checked(tmp_path, rng):
    m = random_sparse(rng, 6, 6, 0.5)
    arrays = {"row_ptr": m.row_ptr, "col_idx": m.col_idx, "values": m.values}
    path = containers.write_container(tmp_path / "m.svda", "sparse-matrix", arrays,
                                      {"rows": 6, "cols": 6, "nnz": m.nnz + 1})
    with pytest.raises(containers.ContainerError, match="nnz"):
        containers.load_sparse(path)
