"""How ranking metrics are computed: masking, tie-breaking and the two candidate pools."""

import math

import numpy as np

from svdrec.evaluator import ndcg_at_k, recall_at_k, top_k_from_scores

scores = np.array([0.9, 0.3, 0.9, 0.5, 0.1, 0.7])
train = [0]
test = [2, 4]

masked = scores.copy()
masked[train] = -np.inf
ranked = top_k_from_scores(masked, 3)
print("top-3 with item 0 masked:", ranked.tolist())
print("tied scores resolve to the smaller id:", top_k_from_scores(np.ones(4), 2).tolist())
print(f"recall@3 {recall_at_k(ranked, test, 3):.3f}")
print(f"ndcg@3 {ndcg_at_k(ranked, test, 3):.4f}")

# one hit at rank 2 out of one relevant item
print(f"single hit at rank 2: {ndcg_at_k([5, 2], [2], 2):.6f} = 1/log2(3) = {1 / math.log2(3):.6f}")

# ranking only a user's own test items makes every test item a hit when k >= |test|
only_test = np.full_like(scores, -np.inf)
only_test[test] = scores[test]
print("test-only candidate pool recall@3:", recall_at_k(top_k_from_scores(only_test, 3), test, 3))
