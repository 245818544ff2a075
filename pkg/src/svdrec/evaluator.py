"""Top-K retrieval with train masking; mean per-user Recall@K and NDCG@K."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .embedder import EmbeddingTable
from .graph_pipeline import InteractionDataset
from .scorer_model import ModelParams, forward

__all__ = [
    "EvalReport",
    "representations",
    "top_k_from_scores",
    "top_k_items",
    "recall_at_k",
    "ndcg_at_k",
    "evaluate",
]

CANDIDATE_MODES = ("all", "test")


@dataclass(frozen=True)
class EvalReport:
    k: int
    recall: float
    ndcg: float
    users_evaluated: int

    def to_record(self) -> dict:
        return asdict(self)


def representations(p: ModelParams, e: EmbeddingTable) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated ``[x | m1 | m2]`` rows for every user and every item."""
    return forward(p, e.user_rows), forward(p, e.item_rows)


def top_k_from_scores(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` highest finite scores; ties go to the smaller index.

    Entries equal to ``-inf`` are treated as masked and never returned.
    """
    cand = np.flatnonzero(scores > -np.inf)
    if cand.size > k:
        # keep everything tied with the k-th best so the id tie-break is exact
        kth = -np.partition(-scores[cand], k - 1)[k - 1]
        cand = cand[scores[cand] >= kth]
    order = np.lexsort((cand, -scores[cand]))
    return cand[order[:k]]


def top_k_items(p: ModelParams, e: EmbeddingTable, user: int, k: int, exclude=()) -> np.ndarray:
    """Best ``k`` items for ``user`` by model score, skipping ``exclude`` (train items)."""
    ru = forward(p, e.user_rows[user])
    scores = forward(p, e.item_rows) @ ru
    scores[np.asarray(exclude, dtype=np.int64)] = -np.inf
    return top_k_from_scores(scores, k)


def recall_at_k(ranked, test_items, k: int) -> float:
    test = set(int(t) for t in test_items)
    if not test:
        raise ValueError("recall is undefined for an empty test set")
    hits = sum(1 for item in list(ranked)[:k] if int(item) in test)
    return hits / len(test)


def ndcg_at_k(ranked, test_items, k: int) -> float:
    test = set(int(t) for t in test_items)
    if not test:
        raise ValueError("NDCG is undefined for an empty test set")
    dcg = sum(
        1.0 / math.log2(rank + 2)
        for rank, item in enumerate(list(ranked)[:k])
        if int(item) in test
    )
    idcg = sum(1.0 / math.log2(rank + 2) for rank in range(min(k, len(test))))
    return dcg / idcg


def evaluate(
    p: ModelParams,
    e: EmbeddingTable,
    d: InteractionDataset,
    k: int = 20,
    candidates: str = "all",
    block_size: int = 2048,
) -> EvalReport:
    """Mean Recall@k / NDCG@k over users that have at least one test item.

    ``candidates="all"`` ranks every item not in the user's train list.
    ``candidates="test"`` ranks only the user's own test items.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if candidates not in CANDIDATE_MODES:
        raise ValueError(f"candidates must be one of {CANDIDATE_MODES}")
    users = np.array([u for u in range(d.num_users) if d.test[u].size], dtype=np.int64)
    ru, ri = representations(p, e)
    recalls, ndcgs = [], []
    for start in range(0, users.size, block_size):
        block = users[start : start + block_size]
        scores = ru[block] @ ri.T
        for row, u in enumerate(block):
            s = scores[row]
            if candidates == "all":
                s[d.train[u]] = -np.inf
            else:
                masked = np.full_like(s, -np.inf)
                masked[d.test[u]] = s[d.test[u]]
                s = masked
            ranked = top_k_from_scores(s, k)
            recalls.append(recall_at_k(ranked, d.test[u], k))
            ndcgs.append(ndcg_at_k(ranked, d.test[u], k))
    n = len(recalls)
    if n == 0:
        return EvalReport(k, 0.0, 0.0, 0)
    return EvalReport(k, math.fsum(recalls) / n, math.fsum(ndcgs) / n, n)
