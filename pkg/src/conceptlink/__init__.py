"""Bipartite link prediction from size-bounded maximal bicliques and a set encoder.

The torch-based model lives in :mod:`conceptlink.model` and is imported
lazily; everything else needs only numpy and scipy.
"""

from .baselines import HeuristicScorer, SVDScorer, score_heuristic, score_mf_svd
from .context import (
    FormalConcept,
    FormalContext,
    SplitResult,
    TestSet,
    closure,
    derive_extent,
    derive_intent,
    generate_test_set,
    load_context,
    split_input_target,
)
from .metrics import EvalReport, compute_metrics
from .miner import ConceptSet, SizeBounds, enumerate_all_bruteforce, is_concept, mine_significant
from .samples import (
    IntermediateSets,
    SampleSet,
    Vocabulary,
    build_intermediate_sets,
    generate_concept_samples,
    generate_context_samples,
    pad_samples,
    prepare_samples,
    tokenize,
)

__version__ = "0.1.0"
