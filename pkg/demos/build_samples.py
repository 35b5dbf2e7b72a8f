"""
Turning concepts into training samples
======================================

Positives are concept pairs and single edges.  Negatives are corrupted
concepts (about half the members swapped out) and non-edges.
"""

import warnings

from conceptlink import SizeBounds, Vocabulary, mine_significant, prepare_samples, tokenize
from conceptlink.synthetic import planted_bicliques

ctx = planted_bicliques(n_objects=60, n_attributes=60, n_bicliques=4, size=8, seed=2)
concepts = mine_significant(ctx, SizeBounds(4, None, 4, None))
print(len(concepts), "concepts")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # small graphs leave a few distractors unplaceable
    samples = prepare_samples(concepts, ctx, k=0.5, distractor_seed=0, context_seed=1)

print("concept pairs:", len(samples.c_p), "positive,", len(samples.c_n), "negative")
print("edge pairs:   ", len(samples.t_p), "positive,", len(samples.t_n), "negative")
print("padded to", samples.l_ext, "objects and", samples.l_int, "attributes")
for note in samples.notes:
    print("note:", note)

###############################################################################
# Each sample becomes ``[CLS] objects [SEP] attributes``.  Order inside a
# side carries no meaning; the encoder has no positional signal.

vocab = Vocabulary.from_context(ctx)
first = samples.samples[0]
print(first.kind, first.label, first.x[:4], "...")
print(tokenize(first, vocab)[:8], "...")
