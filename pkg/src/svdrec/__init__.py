"""SVD node embeddings for top-K recommendation.

Pipeline: interaction files -> bipartite adjacency -> symmetric Laplacian
normalization (and its square) -> truncated SVD embeddings -> linear
two-layer scoring head trained with BPR -> Recall@K / NDCG@K.
"""

from .embedder import EmbeddingTable, build_embeddings, ssb_embeddings, tsa_embeddings
from .evaluator import EvalReport, evaluate, ndcg_at_k, recall_at_k, top_k_items
from .graph_pipeline import (
    InteractionDataset,
    ParseError,
    build_adjacency,
    laplacian_normalize,
    load_dataset,
    matrix_power2,
    parse_interaction_file,
    symmetrize,
)
from .matrix_core import SparseMatrix, dense_svd_small, qr_thin, spmm, spmm_dense, transpose
from .scorer_model import ModelParams, bpr_triple_gradients, forward, init_params, score
from .trainer import TrainConfig, adam_step, bpr_batch_loss, fit, sample_epoch_triples
from .tsvd import TsvdParams, TsvdResult, truncated_svd

__version__ = "0.1.0"
