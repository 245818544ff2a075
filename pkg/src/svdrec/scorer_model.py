"""Two-layer linear perceptron over frozen SVD embeddings, dot-product scoring.

A node's representation is ``[x | m1 | m2]`` with ``m1 = x @ w1 + b1`` and
``m2 = m1 @ w2 + b2`` (identity activation). The same weights transform users
and items, so ``score(a, b) == score(b, a)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ModelParams",
    "init_params",
    "forward",
    "score",
    "bpr_terms",
    "bpr_triple_gradients",
]

PARAM_NAMES = ("w1", "b1", "w2", "b2")
WEIGHT_NAMES = ("w1", "w2")


@dataclass(eq=False)
class ModelParams:
    w1: np.ndarray  # d x h
    b1: np.ndarray  # h
    w2: np.ndarray  # h x h
    b2: np.ndarray  # h
    use_bias: bool = True

    def __post_init__(self):
        d, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h, h) or self.b2.shape != (h,):
            raise ValueError(
                f"inconsistent shapes w1={self.w1.shape} b1={self.b1.shape} "
                f"w2={self.w2.shape} b2={self.b2.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.in_dim + 2 * self.hidden

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> ModelParams:
        return replace(self, **arrays)

    def copy(self) -> ModelParams:
        return self.with_arrays({k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> ModelParams:
        return self.with_arrays({k: np.zeros_like(v) for k, v in self.arrays().items()})

    def weight_sq_norm(self) -> float:
        return float(sum(np.vdot(getattr(self, k), getattr(self, k)) for k in WEIGHT_NAMES))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays().values())

    def allclose(self, other: ModelParams, **kw) -> bool:
        return all(np.allclose(getattr(self, k), getattr(other, k), **kw) for k in PARAM_NAMES)


def init_params(d: int, h: int = 512, seed: int = 0, use_bias: bool = True) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights per layer; zero biases."""
    rng = np.random.Generator(np.random.Philox(seed))
    w1 = rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(d, h))
    w2 = rng.uniform(-1.0 / np.sqrt(h), 1.0 / np.sqrt(h), size=(h, h))
    return ModelParams(w1, np.zeros(h), w2, np.zeros(h), use_bias=use_bias)


def _check_input(p: ModelParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.in_dim or x.ndim not in (1, 2):
        raise ValueError(f"expected input of width {p.in_dim}, got shape {x.shape}")
    return x


def _layers(p: ModelParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m1 = x @ p.w1
    if p.use_bias:
        m1 = m1 + p.b1
    m2 = m1 @ p.w2
    if p.use_bias:
        m2 = m2 + p.b2
    return m1, m2


def forward(p: ModelParams, x) -> np.ndarray:
    """Concatenated representation ``[x | m1 | m2]`` for one row or a batch of rows."""
    x = _check_input(p, x)
    m1, m2 = _layers(p, x)
    return np.concatenate([x, m1, m2], axis=-1)


def score(p: ModelParams, x_u, x_i):
    """Dot product of the two concatenated representations (row-wise for batches)."""
    ru, ri = forward(p, x_u), forward(p, x_i)
    if ru.shape != ri.shape:
        raise ValueError(f"shape mismatch {ru.shape} vs {ri.shape}")
    return np.einsum("...j,...j->...", ru, ri)


def bpr_terms(p: ModelParams, xu, xi, xj) -> tuple[np.ndarray, ModelParams]:
    """Per-triple BPR losses and the gradient of their *sum*.

    Inputs are ``B x d`` batches of user, positive-item and negative-item
    embeddings. The loss of one triple is ``-log sigmoid(s_ui - s_uj)``.
    """
    xu, xi, xj = (np.atleast_2d(_check_input(p, x)) for x in (xu, xi, xj))
    m1u, m2u = _layers(p, xu)
    m1i, m2i = _layers(p, xi)
    m1j, m2j = _layers(p, xj)

    dm1 = m1i - m1j
    dm2 = m2i - m2j
    delta = (
        np.einsum("bj,bj->b", xu, xi - xj)
        + np.einsum("bj,bj->b", m1u, dm1)
        + np.einsum("bj,bj->b", m2u, dm2)
    )
    if not np.all(np.isfinite(delta)):
        raise FloatingPointError("non-finite score difference")
    losses = np.logaddexp(0.0, -delta)
    g = -np.exp(-np.logaddexp(0.0, delta))  # dL/d(delta) = sigmoid(delta) - 1
    g = g[:, None]

    # upstream gradients w.r.t. each tower's m2 and (direct) m1 outputs
    c2u, c1u = g * dm2, g * dm1
    c2i, c1i = g * m2u, g * m1u
    c2j = -c2i

    gw2 = m1u.T @ c2u + dm1.T @ c2i
    d1u = c1u + c2u @ p.w2.T
    d1i = c1i + c2i @ p.w2.T
    d1j = -d1i
    gw1 = xu.T @ d1u + (xi - xj).T @ d1i
    if p.use_bias:
        gb2 = (c2u + c2i + c2j).sum(axis=0)
        gb1 = (d1u + d1i + d1j).sum(axis=0)
    else:
        gb1 = np.zeros_like(p.b1)
        gb2 = np.zeros_like(p.b2)
    grads = p.with_arrays({"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2})
    if not grads.all_finite():
        raise FloatingPointError("non-finite BPR gradient")
    return losses, grads


def bpr_triple_gradients(p: ModelParams, x_u, x_i, x_j) -> ModelParams:
    """Gradient of ``-log sigmoid(score(u, i) - score(u, j))`` for one triple."""
    _, grads = bpr_terms(p, x_u, x_i, x_j)
    return grads
