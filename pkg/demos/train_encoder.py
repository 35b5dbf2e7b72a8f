"""
Training the set encoder on planted bicliques
=============================================

The full pipeline at desk scale: hold out 10% of edges, mine the dense
blocks from what is left, train the small encoder and score the held-out
pairs.  Runs in a couple of minutes on one CPU thread.
"""

import time
import warnings

import numpy as np
import torch

from conceptlink import (
    HeuristicScorer,
    SizeBounds,
    Vocabulary,
    compute_metrics,
    generate_test_set,
    mine_significant,
    prepare_samples,
    split_input_target,
)
from conceptlink.model import EncoderConfig, predict, predict_pairs, train
from conceptlink.synthetic import planted_bicliques

torch.set_num_threads(1)
warnings.simplefilter("ignore")

ctx = planted_bicliques(seed=0)
split = split_input_target(ctx, 0.1, seed=0)
inp = split.input_context

concepts = mine_significant(inp, SizeBounds(8, None, 8, None))
samples = prepare_samples(concepts, inp, k=0.5, distractor_seed=1, context_seed=2)
test = generate_test_set(split, samples.t_n, seed=3)
print(len(concepts), "concepts,", len(samples), "training samples")

vocab = Vocabulary.from_context(inp)
cfg = EncoderConfig.desk(len(vocab), samples.l_ext, samples.l_int, seed=4)

t0 = time.perf_counter()
model, report = train(samples.samples, vocab, cfg, epochs=50, batch_size=24, lr=1e-3, shuffle_seed=5,
                      callback=lambda e, loss: e % 10 == 0 and print(f"epoch {e}: loss {loss:.4f}"))
print(f"trained in {time.perf_counter() - t0:.0f}s")

pairs = [(inp.objects[g], inp.attributes[m]) for g, m, _ in test.labeled()]
labels = np.array([y for _, _, y in test.labeled()])
r = compute_metrics(predict_pairs(model, vocab, pairs), labels)
cn = HeuristicScorer(inp, "cn").score_pairs(pairs)
print(f"encoder AUC {r.auc:.3f}, common neighbours AUC {compute_metrics(cn, labels).auc:.3f}")

###############################################################################
# The model also scores whole object and attribute sets, not just edges.

c = concepts.canonical()[0]
objs = [inp.objects[g] for g in c.extent]
attrs = [inp.attributes[m] for m in c.intent]
print("a mined concept:", round(predict(model, vocab, objs, attrs), 3))
print("same objects, shuffled attributes:", round(predict(model, vocab, objs[::-1], attrs[::-1]), 3))
