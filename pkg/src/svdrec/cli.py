"""Command-line front end: ``prepare``, ``embed``, ``train``, ``eval`` and ``run``.

Settings come from a flat ``key = value`` file (``--config``) with flags
overriding it. Every stage writes SVDA containers into the output directory
and appends one JSON record per line to ``metrics.jsonl``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import containers
from .baselines import PUBLISHED, guess_dataset
from .embedder import METHODS, ssb_embeddings, tsa_embeddings
from .evaluator import evaluate
from .graph_pipeline import (
    build_adjacency,
    laplacian_normalize,
    load_dataset,
    matrix_power2,
    symmetrize,
)
from .trainer import TrainConfig, fit
from .tsvd import TsvdParams, truncated_svd

log = logging.getLogger("svdrec")

DEFAULT_SVD_DIM = {"ssb": 512, "tsa": 1024}


@dataclass
class RunConfig:
    train: str = ""
    test: str = ""
    dataset: str = ""  # name for the published-results table; guessed from paths if empty
    method: str = "tsa"
    svd_dim: list[int] = field(default_factory=list)  # empty: 512 for ssb, 1024 for tsa
    hidden: int = 512
    batch_size: int = 1024
    learning_rate: float = 1e-3
    l2_reg: float = 1e-4
    epochs: int = 400
    seed: int = 0
    eval_every: int = 10
    select_best: bool = True
    use_bias: bool = True
    k: int = 20
    candidates: str = "all"
    oversampling: int = 10
    power_iters: int = 7
    drop_tol: float = 0.0
    output: str = "runs"
    cache: bool = True

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.svd_dim:
            self.svd_dim = [DEFAULT_SVD_DIM[self.method]]
        for dim in self.svd_dim:
            if dim < 1:
                raise ValueError(f"svd_dim must be positive, got {dim}")
            if self.method == "tsa" and dim % 2:
                raise ValueError(f"tsa needs an even svd_dim, got {dim}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        self.train_config()  # field-level checks

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            l2_reg=self.l2_reg,
            epochs=self.epochs,
            seed=self.seed,
            eval_every=self.eval_every,
            eval_k=self.k,
            hidden=self.hidden,
            use_bias=self.use_bias,
            select_best=self.select_best,
            candidates=self.candidates,
        )

    def echo(self, svd_dim: int) -> dict:
        return {"method": self.method, "svd_dim": svd_dim, "seed": self.seed}


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "list[int]":
        return [int(x) for x in raw.replace(",", " ").split()]
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}:{line_no}: unknown key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from None
    return values


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--train", help="NGCF-format train file")
    common.add_argument("--test", help="NGCF-format test file")
    common.add_argument("--dataset", help="dataset name for the published-results table")
    common.add_argument("--output", "-o", help="output directory (default: runs)")
    common.add_argument("--seed", type=int)
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--svd-dim", help="embedding width, or a comma list for a sweep")
    common.add_argument("--hidden", type=int, help="perceptron width (default 512)")
    common.add_argument("--epochs", type=int)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--lr", dest="learning_rate", type=float)
    common.add_argument("--l2", dest="l2_reg", type=float)
    common.add_argument("--eval-every", type=int)
    common.add_argument("--k", type=int, help="ranking cutoff (default 20)")
    common.add_argument("--candidates", choices=("all", "test"))
    common.add_argument("--oversampling", type=int)
    common.add_argument("--power-iters", type=int)
    common.add_argument("--drop-tol", type=float)
    common.add_argument("--no-cache", dest="cache", action="store_const", const=False)
    common.add_argument("--no-bias", dest="use_bias", action="store_const", const=False)
    common.add_argument("--last-epoch", dest="select_best", action="store_const", const=False,
                        help="keep the final epoch instead of the best evaluated one")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svdrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="parse data; cache A, normalized A and its square")
    sub.add_parser("embed", parents=[common], help="truncated SVD embeddings")
    sub.add_parser("train", parents=[common], help="BPR training of the scoring head")
    sub.add_parser("eval", parents=[common], help="Recall@K / NDCG@K on the test split")
    sub.add_parser("run", parents=[common], help="prepare, embed, train and eval in sequence")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is None:
            continue
        values[key] = _coerce(key, flag) if key == "svd_dim" else flag
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# -- paths and records ------------------------------------------------------


class Workspace:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = Path(cfg.output)

    def prepared(self, name: str) -> Path:
        return self.root / "prepared" / f"{name}.svda"

    def tag(self, dim: int) -> str:
        return f"{self.cfg.method}_{dim}"

    def embeddings(self, dim: int) -> Path:
        return self.root / f"embeddings_{self.tag(dim)}.svda"

    def checkpoint(self, dim: int) -> Path:
        return self.root / f"checkpoint_{self.tag(dim)}.svda"

    def report(self, dim: int) -> Path:
        return self.root / f"report_{self.tag(dim)}.svda"

    def train_log(self, dim: int) -> Path:
        return self.root / f"train_{self.tag(dim)}.jsonl"

    def record(self, rec: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / "metrics.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


@contextmanager
def output_lock(root: Path):
    root.mkdir(parents=True, exist_ok=True)
    lock = root / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"{root} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _source_digest(cfg: RunConfig) -> str:
    h = hashlib.sha256()
    for path in (cfg.train, cfg.test):
        h.update(Path(path).read_bytes())
        h.update(b"\0")
    return h.hexdigest()


def _dataset(cfg: RunConfig):
    if not cfg.train or not cfg.test:
        raise ValueError("train and test files are required (--train/--test or config keys)")
    return load_dataset(cfg.train, cfg.test)


# -- commands ---------------------------------------------------------------


def cmd_prepare(cfg: RunConfig, ws: Workspace) -> None:
    if not cfg.train or not cfg.test:
        raise ValueError("train and test files are required (--train/--test or config keys)")
    digest = _source_digest(cfg)
    wanted = ["adjacency", "norm_adjacency"] + (["norm_adjacency_sq"] if cfg.method == "tsa" else [])
    if cfg.cache and _cache_valid(ws, wanted, digest, cfg.drop_tol):
        log.info("prepare: cache hit in %s", ws.root / "prepared")
        ws.record({"event": "prepare", "cache_hit": True})
        return

    d = _dataset(cfg)
    a = build_adjacency(d)
    a_norm = laplacian_normalize(symmetrize(a))
    meta = {"source_sha256": digest, "num_users": d.num_users, "num_items": d.num_items, "drop_tol": cfg.drop_tol}
    containers.save_sparse(ws.prepared("adjacency"), a, meta)
    containers.save_sparse(ws.prepared("norm_adjacency"), a_norm, meta)
    rec = {
        "event": "prepare",
        "cache_hit": False,
        "num_users": d.num_users,
        "num_items": d.num_items,
        "num_nodes": a_norm.rows,
        "train_interactions": d.num_train,
        "test_interactions": d.num_test,
    }
    if "norm_adjacency_sq" in wanted:
        t0 = time.perf_counter()
        sq = matrix_power2(a_norm, drop_tol=cfg.drop_tol)
        rec["square_seconds"] = time.perf_counter() - t0
        rec["square_nnz"] = sq.nnz
        containers.save_sparse(ws.prepared("norm_adjacency_sq"), sq, meta)
    log.info("prepare: %d users, %d items, %d nodes, %d train / %d test interactions",
             d.num_users, d.num_items, a_norm.rows, d.num_train, d.num_test)
    ws.record(rec)


def _cache_valid(ws: Workspace, names, digest: str, drop_tol: float) -> bool:
    for name in names:
        path = ws.prepared(name)
        if not path.exists():
            return False
        try:
            _, meta = containers.load_sparse(path)
        except containers.ContainerError:
            return False
        if meta.get("source_sha256") != digest or meta.get("drop_tol") != drop_tol:
            return False
    return True


def _load_prepared(ws: Workspace, name: str):
    path = ws.prepared(name)
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `svdrec prepare` first")
    return containers.load_sparse(path)


def cmd_embed(cfg: RunConfig, ws: Workspace) -> None:
    a_norm, meta = _load_prepared(ws, "norm_adjacency")
    m, n = meta["num_users"], meta["num_items"]
    sq = _load_prepared(ws, "norm_adjacency_sq")[0] if cfg.method == "tsa" else None
    for dim in cfg.svd_dim:
        k = dim if cfg.method == "ssb" else dim // 2
        params = TsvdParams(k, cfg.oversampling, cfg.power_iters, cfg.seed)
        t0 = time.perf_counter()
        f1 = truncated_svd(a_norm, params)
        hop1 = time.perf_counter() - t0
        timing = {"svd_hop1_seconds": hop1}
        if sq is None:
            table = ssb_embeddings(f1, m, n)
        else:
            t0 = time.perf_counter()
            f2 = truncated_svd(sq, params)
            timing["svd_hop2_seconds"] = time.perf_counter() - t0
            table = tsa_embeddings(f1, f2, m, n)
        timing["svd_seconds"] = sum(timing.values())
        svd_meta = {**cfg.echo(dim), "k_per_hop": k, "oversampling": cfg.oversampling,
                    "power_iters": cfg.power_iters, "source_sha256": meta["source_sha256"]}
        containers.save_embeddings(ws.embeddings(dim), table, svd_meta)
        log.info("embed %s: %d x %d users, %d x %d items, svd %.2fs",
                 ws.tag(dim), m, table.dim, n, table.dim, timing["svd_seconds"])
        ws.record({"event": "svd_timing", **cfg.echo(dim), **timing})


def _load_embeddings(ws: Workspace, dim: int):
    path = ws.embeddings(dim)
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `svdrec embed` first")
    return containers.load_embeddings(path)[0]


def cmd_train(cfg: RunConfig, ws: Workspace) -> None:
    d = _dataset(cfg)
    tcfg = cfg.train_config()
    for dim in cfg.svd_dim:
        e = _load_embeddings(ws, dim)
        log_path = ws.train_log(dim)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(log_path, "w", encoding="utf-8") as fh:
            def write(rec, fh=fh, dim=dim):
                fh.write(json.dumps({**cfg.echo(dim), **rec}, sort_keys=True) + "\n")
                fh.flush()

            result = fit(d, e, tcfg, on_epoch=write)
        containers.save_params(ws.checkpoint(dim), result.params,
                               {**cfg.echo(dim), "best_epoch": result.best_epoch, "epochs": cfg.epochs})
        ws.record({"event": "train", **cfg.echo(dim), "epochs": cfg.epochs, "best_epoch": result.best_epoch,
                   "final_loss": result.log[-1]["loss"] if result.log else None})


def cmd_eval(cfg: RunConfig, ws: Workspace) -> None:
    d = _dataset(cfg)
    for dim in cfg.svd_dim:
        e = _load_embeddings(ws, dim)
        ckpt = ws.checkpoint(dim)
        if not ckpt.exists():
            raise FileNotFoundError(f"{ckpt} missing; run `svdrec train` first")
        p, _ = containers.load_params(ckpt)
        report = evaluate(p, e, d, cfg.k, candidates=cfg.candidates)
        containers.save_report(ws.report(dim), report, {**cfg.echo(dim), "candidates": cfg.candidates})
        ws.record({"event": "eval", **cfg.echo(dim), **report.to_record()})
        print(format_report(cfg, dim, report))


def format_report(cfg: RunConfig, dim: int, report) -> str:
    name = cfg.dataset or guess_dataset(cfg.train) or ""
    label = f"{cfg.method.upper()} ({dim}) [this run]"
    rows = [(label, report.recall, report.ndcg)]
    if name in PUBLISHED and cfg.k == 20:
        rows += [(method, r, n) for method, (r, n) in PUBLISHED[name].items()]
    width = max(len(r[0]) for r in rows)
    lines = [
        f"dataset={name or '?'} method={cfg.method} svd_dim={dim} seed={cfg.seed} "
        f"k={report.k} users={report.users_evaluated}",
        f"{'model':<{width}}  {'Recall@' + str(cfg.k):>10}  {'NDCG@' + str(cfg.k):>10}",
    ]
    lines += [f"{m:<{width}}  {r:>10.4f}  {n:>10.4f}" for m, r, n in rows]
    return "\n".join(lines)


COMMANDS = {
    "prepare": [cmd_prepare],
    "embed": [cmd_embed],
    "train": [cmd_train],
    "eval": [cmd_eval],
    "run": [cmd_prepare, cmd_embed, cmd_train, cmd_eval],
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = build_config(args)
        ws = Workspace(cfg)
        with output_lock(ws.root):
            for step in COMMANDS[args.command]:
                step(cfg, ws)
    except (ValueError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"svdrec: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
