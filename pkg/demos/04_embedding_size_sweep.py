"""Sweep the SVD width for both embedding schemes on a noisier planted dataset."""

from svdrec import TrainConfig, build_embeddings, evaluate, fit
from svdrec.synthetic import community_dataset

d = community_dataset(num_users=200, num_items=200, communities=8, train_per_user=12, test_per_user=8, seed=3)
cfg = TrainConfig(hidden=32, epochs=60, eval_k=10)

print(f"{'method':6s} {'dim':>4s} {'loss':>8s} {'recall@10':>10s} {'ndcg@10':>8s} {'svd ms':>7s}")
for method in ("ssb", "tsa"):
    for dim in (4, 8, 16, 32):
        e, timings = build_embeddings(d, method, dim, seed=0)
        result = fit(d, e, cfg)
        r = evaluate(result.params, e, d, k=10)
        print(f"{method:6s} {dim:4d} {result.log[-1]['loss']:8.4f} {r.recall:10.3f} {r.ndcg:8.3f} "
              f"{timings['svd_seconds'] * 1e3:7.1f}")
