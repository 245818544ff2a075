"""Small planted-structure datasets for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph_pipeline import InteractionDataset

__all__ = ["community_dataset"]


def community_dataset(
    num_users: int = 60,
    num_items: int = 60,
    communities: int = 2,
    train_per_user: int = 20,
    test_per_user: int = 5,
    seed: int = 0,
) -> InteractionDataset:
    """Users and items split into equal communities; every positive is in-community.

    Each user draws ``train_per_user + test_per_user`` distinct items from its
    own community and the first ``train_per_user`` go to train.
    """
    if num_users % communities or num_items % communities:
        raise ValueError("user and item counts must divide evenly into communities")
    block = num_items // communities
    if train_per_user + test_per_user > block:
        raise ValueError("community too small for the requested positives per user")
    rng = np.random.Generator(np.random.Philox(seed))
    users_per = num_users // communities
    train, test = [], []
    for u in range(num_users):
        c = u // users_per
        picks = c * block + rng.permutation(block)[: train_per_user + test_per_user]
        train.append(np.sort(picks[:train_per_user]))
        test.append(np.sort(picks[train_per_user:]))
    return InteractionDataset(num_users, num_items, train, test)
