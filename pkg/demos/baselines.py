"""
Heuristic and factorization baselines
=====================================

Object-side similarity summed over an attribute's neighbours, and a
truncated SVD reconstruction, scored on a held-out split.
"""

import numpy as np

from conceptlink import HeuristicScorer, SVDScorer, compute_metrics, generate_test_set, split_input_target
from conceptlink.synthetic import planted_bicliques

ctx = planted_bicliques(seed=0)
split = split_input_target(ctx, 0.1, seed=1)
test = generate_test_set(split, [], seed=2)
train_ctx = split.input_context

pairs = [(train_ctx.objects[g], train_ctx.attributes[m]) for g, m, _ in test.labeled()]
labels = np.array([y for _, _, y in test.labeled()])
print(len(pairs), "test pairs,", labels.sum(), "positive")

for kind in ("cn", "jc", "aa", "ra"):
    scores = HeuristicScorer(train_ctx, kind).score_pairs(pairs)
    r = compute_metrics(scores, labels, threshold=np.median(scores))
    print(f"{kind:>3}: AUC {r.auc:.3f}  AUPR {r.aupr:.3f}  F1 {r.f1:.3f}")

for rank in (10, 32, 64):
    scores = SVDScorer(train_ctx, rank).score_pairs(pairs)
    r = compute_metrics(scores, labels)
    print(f"svd{rank}: AUC {r.auc:.3f}  AUPR {r.aupr:.3f}  F1 {r.f1:.3f}")
