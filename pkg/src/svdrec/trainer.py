"""Mini-batch BPR training of the scoring head with Adam.

SVD embeddings are frozen inputs; only the perceptron weights and biases
are updated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .embedder import EmbeddingTable
from .evaluator import EvalReport, evaluate
from .graph_pipeline import InteractionDataset
from .scorer_model import WEIGHT_NAMES, ModelParams, bpr_terms, init_params

__all__ = [
    "TrainConfig",
    "AdamState",
    "Triples",
    "FitResult",
    "sample_epoch_triples",
    "bpr_batch_loss",
    "init_adam",
    "adam_step",
    "fit",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1024
    learning_rate: float = 1e-3
    l2_reg: float = 1e-4
    epochs: int = 400
    seed: int = 0
    eval_every: int = 0  # 0 disables evaluation during training
    eval_k: int = 20
    hidden: int = 512
    use_bias: bool = True
    select_best: bool = True  # keep the epoch with the best Recall@eval_k
    candidates: str = "all"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be >= 0")
        if self.epochs < 0 or self.eval_every < 0:
            raise ValueError("epochs and eval_every must be >= 0")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Triples(NamedTuple):
    """Parallel arrays of (user, positive item, negative item)."""

    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray

    def __len__(self):
        return int(self.users.size)

    def take(self, idx) -> Triples:
        return Triples(self.users[idx], self.pos[idx], self.neg[idx])


@dataclass
class FitResult:
    params: ModelParams
    log: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    best_report: EvalReport | None = None


def sample_epoch_triples(d: InteractionDataset, rng: np.random.Generator) -> Triples:
    """One triple per train interaction, shuffled, with uniform rejection-sampled negatives."""
    users, pos = d.train_pairs()
    n = d.num_items
    counts = np.array([t.size for t in d.train])
    full = np.flatnonzero((counts >= n) & (counts > 0))
    if full.size:
        raise ValueError(f"user {int(full[0])} interacted with every item; no negative to sample")

    order = rng.permutation(users.size)
    users, pos = users[order], pos[order]
    # train_pairs() is user-major with sorted items, so these keys are sorted
    seen = np.concatenate([u * n + t for u, t in enumerate(d.train)]) if d.num_users else users
    neg = rng.integers(0, n, size=users.size)
    todo = np.arange(users.size)
    while todo.size:
        keys = users[todo] * n + neg[todo]
        hit = np.searchsorted(seen, keys)
        clash = (hit < seen.size) & (seen[np.minimum(hit, seen.size - 1)] == keys)
        todo = todo[clash]
        neg[todo] = rng.integers(0, n, size=todo.size)
    return Triples(users, pos, neg)


def bpr_batch_loss(
    p: ModelParams, batch: Triples, e: EmbeddingTable, l2: float
) -> tuple[float, ModelParams]:
    """Mean BPR loss over the batch plus ``l2 * ||weights||^2``, with its gradient."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    losses, grads = bpr_terms(
        p, e.user_rows[batch.users], e.item_rows[batch.pos], e.item_rows[batch.neg]
    )
    scale = 1.0 / len(batch)
    out = {name: g * scale for name, g in grads.arrays().items()}
    for name in WEIGHT_NAMES:
        out[name] += 2.0 * l2 * getattr(p, name)
    loss = float(losses.mean()) + l2 * p.weight_sq_norm()
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite batch loss")
    return loss, grads.with_arrays(out)


def init_adam(p: ModelParams) -> AdamState:
    zeros = {k: np.zeros_like(v) for k, v in p.arrays().items()}
    return AdamState(m=zeros, v={k: z.copy() for k, z in zeros.items()})


def adam_step(
    p: ModelParams, grads: ModelParams, st: AdamState, lr: float
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    t = st.t + 1
    bc1 = 1.0 - st.beta1**t
    bc2 = 1.0 - st.beta2**t
    new_p, new_m, new_v = {}, {}, {}
    for name, w in p.arrays().items():
        g = getattr(grads, name)
        m = st.beta1 * st.m[name] + (1.0 - st.beta1) * g
        v = st.beta2 * st.v[name] + (1.0 - st.beta2) * (g * g)
        new_p[name] = w - lr * (m / bc1) / (np.sqrt(v / bc2) + st.eps)
        new_m[name], new_v[name] = m, v
    state = AdamState(new_m, new_v, t, st.beta1, st.beta2, st.eps)
    return p.with_arrays(new_p), state


def fit(
    d: InteractionDataset,
    e: EmbeddingTable,
    cfg: TrainConfig,
    on_epoch: Callable[[dict], None] | None = None,
    init: ModelParams | None = None,
) -> FitResult:
    """Train the scoring head; returns params plus one log record per epoch.

    When ``cfg.eval_every > 0`` and ``cfg.select_best`` is set, the returned
    params are those of the evaluated epoch with the highest Recall@eval_k.
    """
    if e.num_users != d.num_users or e.num_items != d.num_items:
        raise ValueError("embedding table and dataset disagree on user/item counts")
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    params = init if init is not None else init_params(
        e.dim, cfg.hidden, seed=int(seeds[0].generate_state(1)[0]), use_bias=cfg.use_bias
    )
    if params.in_dim != e.dim:
        raise ValueError(f"params expect width {params.in_dim}, embeddings have {e.dim}")
    rng = np.random.Generator(np.random.Philox(seeds[1]))
    state = init_adam(params)
    result = FitResult(params=params)
    best_params = None

    for epoch in range(1, cfg.epochs + 1):
        triples = sample_epoch_triples(d, rng)
        total = 0.0
        for start in range(0, len(triples), cfg.batch_size):
            batch = triples.take(slice(start, start + cfg.batch_size))
            loss, grads = bpr_batch_loss(params, batch, e, cfg.l2_reg)
            params, state = adam_step(params, grads, state, cfg.learning_rate)
            total += loss * len(batch)
        record = {"epoch": epoch, "loss": total / max(len(triples), 1)}

        if cfg.eval_every and epoch % cfg.eval_every == 0:
            report = evaluate(params, e, d, cfg.eval_k, candidates=cfg.candidates)
            record["recall"] = report.recall
            record["ndcg"] = report.ndcg
            if result.best_report is None or report.recall > result.best_report.recall:
                result.best_report, result.best_epoch = report, epoch
                best_params = params.copy()
        log.info("epoch %d loss %.6f%s", epoch, record["loss"],
                 f" recall {record['recall']:.4f}" if "recall" in record else "")
        result.log.append(record)
        if on_epoch is not None:
            on_epoch(record)

    result.params = best_params if (cfg.select_best and best_params is not None) else params
    return result
