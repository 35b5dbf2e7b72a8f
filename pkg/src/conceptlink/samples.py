"""Training-sample generation from mined concepts and from the raw context.

Four sample kinds feed the classifier:

* concept positives ``C_p``: extent/intent combinations that are fully connected,
* concept negatives ``C_n``: corrupted copies of those pairs that are not,
* context positives ``T_p``: every single edge ``({g}, {m})``,
* context negatives ``T_n``: an equal number of single non-edges.

All sets are frozensets of context indices until :func:`pad_samples` turns
them into fixed-length token sequences.
"""

import io
import json
import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, make_rng
from .context import _write_text, intent_bits, to_bitset

logger = logging.getLogger(__name__)

PAD, CLS, SEP = "[PAD]", "[CLS]", "[SEP]"
SPECIAL_TOKENS = (PAD, CLS, SEP)

DISTRACTOR_RETRIES = 100
RESAMPLE_RETRIES = 100


def fully_connected(ctx, objects, attributes):
    """``objects x attributes`` is a subset of the incidence."""
    need = to_bitset(attributes, ctx.n_attributes, "attribute index")
    rows = ctx.rows
    return all(rows[g] & need == need for g in objects)


# -- intermediate sets -----------------------------------------------------------


@dataclass
class IntermediateSets:
    extents: list
    intents: list
    distractor_extents: list
    distractor_intents: list
    k: float
    # source -> distractor and distractor -> source, for extents and intents
    extent_distractor: dict = field(default_factory=dict)
    intent_distractor: dict = field(default_factory=dict)
    extent_source: dict = field(default_factory=dict)
    intent_source: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _corrupt(members, universe_size, n_replace, rng):
    """Swap ``n_replace`` randomly chosen members for distinct outsiders.

    Returns ``None`` when there are not enough outsiders.
    """
    members = sorted(members)
    outside = universe_size - len(members)
    if n_replace > len(members) or n_replace > outside:
        return None
    positions = rng.choice(len(members), size=n_replace, replace=False)
    member_set = set(members)
    picks = []
    picked = set()
    while len(picks) < n_replace:
        cand = int(rng.integers(universe_size))
        if cand in member_set or cand in picked:
            continue
        picked.add(cand)
        picks.append(cand)
    out = set(members)
    for pos, new in zip(sorted(positions), picks):
        out.discard(members[pos])
        out.add(new)
    return frozenset(out)


def replacement_count(size, k):
    # floor(k*|A|) is 0 for small sets and would never change the set
    return max(1, int(np.floor(k * size)))


def _distractors(sources, universe_size, k, rng, what, notes):
    taken = set(sources)
    forward, backward, order = {}, {}, []
    for src in sources:
        n = replacement_count(len(src), k)
        found = None
        for _ in range(DISTRACTOR_RETRIES):
            cand = _corrupt(src, universe_size, n, rng)
            if cand is None:
                break
            if cand not in taken:
                found = cand
                break
        if found is None:
            msg = f"no distractor found for {what} of size {len(src)}; skipped"
            notes.append(msg)
            logger.warning(msg)
            continue
        taken.add(found)
        forward[src] = found
        backward[found] = src
        order.append(found)
    return order, forward, backward


def build_intermediate_sets(concepts, ctx, k=0.5, seed=0):
    """Collect extents/intents and build one distractor per extent and intent.

    A distractor replaces ``max(1, floor(k*|A|))`` members of its source with
    objects (attributes) from outside the source, so it has the source's
    size.  It must differ from every source and every earlier distractor;
    sources with no such distractor after a bounded number of tries are
    skipped and reported in ``warnings``.
    """
    if not 0 < k < 1:
        raise ValueError(f"k must lie in (0, 1), got {k}")
    concepts = list(concepts)
    if not concepts:
        raise ValueError("no concepts to build intermediate sets from")
    extents = list(dict.fromkeys(frozenset(c.extent) for c in concepts))
    intents = list(dict.fromkeys(frozenset(c.intent) for c in concepts))
    rng = make_rng(seed)
    notes = []
    e_n, e_fwd, e_bwd = _distractors(extents, ctx.n_objects, k, rng, "extent", notes)
    i_n, i_fwd, i_bwd = _distractors(intents, ctx.n_attributes, k, rng, "intent", notes)
    if notes:
        warnings.warn(f"{len(notes)} distractor(s) could not be generated", RuntimeWarning, stacklevel=2)
    return IntermediateSets(extents, intents, e_n, i_n, k, e_fwd, i_fwd, e_bwd, i_bwd, notes)


# -- concept samples -------------------------------------------------------------


def generate_concept_samples(sets, ctx, seed=0):
    """Return ``(C_p, C_n, notes)``.

    ``C_p`` holds every extent/intent combination that is fully connected,
    including cross combinations from different concepts.  For each of
    those the distractor pair is a negative when it is *not* fully
    connected.  Pairs without a usable distractor pair get fresh
    distractors drawn up to a cap; any remaining shortfall is reported.
    """
    # A x B is in I  <=>  B is a subset of the attributes shared by all of A
    shared = [intent_bits(ctx, to_bitset(a, ctx.n_objects)) for a in sets.extents]
    intent_masks = [to_bitset(b, ctx.n_attributes) for b in sets.intents]
    c_p = [
        (a, b)
        for a, common in zip(sets.extents, shared)
        for b, mask in zip(sets.intents, intent_masks)
        if not mask & ~common
    ]
    c_n, failed = [], []
    for a, b in c_p:
        a_n = sets.extent_distractor.get(a)
        b_n = sets.intent_distractor.get(b)
        if a_n is not None and b_n is not None and not fully_connected(ctx, a_n, b_n):
            c_n.append((a_n, b_n))
        else:
            failed.append((a, b))

    notes = []
    if failed:
        rng = make_rng(seed)
        ext_taken = set(sets.extents)
        int_taken = set(sets.intents)
        have = set(c_n)
        for a, b in failed:
            for _ in range(RESAMPLE_RETRIES):
                a_n = _corrupt(a, ctx.n_objects, replacement_count(len(a), sets.k), rng)
                b_n = _corrupt(b, ctx.n_attributes, replacement_count(len(b), sets.k), rng)
                if a_n is None or b_n is None:
                    break
                if a_n in ext_taken or b_n in int_taken or (a_n, b_n) in have:
                    continue
                if fully_connected(ctx, a_n, b_n):
                    continue
                c_n.append((a_n, b_n))
                have.add((a_n, b_n))
                break
        if len(c_n) < len(c_p):
            msg = f"concept samples unbalanced: {len(c_p)} positive vs {len(c_n)} negative"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return c_p, c_n, notes


# -- context samples -------------------------------------------------------------


def generate_context_samples(ctx, seed=0):
    """Return ``(T_p, T_n, notes)``: one positive per edge, as many random non-edges.

    Samples are ``(frozenset({g}), frozenset({m}))`` pairs.  When the context
    has fewer non-edges than edges, every non-edge is used (in random order)
    and a warning is issued.
    """
    if ctx.n_objects == 0 or ctx.n_attributes == 0:
        raise ValueError("context has no objects or attributes")
    t_p = [(frozenset((g,)), frozenset((m,))) for g, m in ctx.iter_incidence()]
    n_obj, n_attr = ctx.n_objects, ctx.n_attributes
    n_non_edges = n_obj * n_attr - ctx.n_incidences
    rng = make_rng(seed)
    notes = []
    if n_non_edges <= len(t_p):
        all_non = [(g, m) for g in range(n_obj) for m in range(n_attr) if not ctx.has_edge(g, m)]
        order = rng.permutation(len(all_non))
        pairs = [all_non[i] for i in order]
        if n_non_edges < len(t_p):
            msg = f"only {n_non_edges} non-edges for {len(t_p)} positive context samples; using all of them"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    else:
        pairs, seen = [], set()
        rows = ctx.rows
        while len(pairs) < len(t_p):
            g = int(rng.integers(n_obj))
            m = int(rng.integers(n_attr))
            if rows[g] >> m & 1 or (g, m) in seen:
                continue
            seen.add((g, m))
            pairs.append((g, m))
    t_n = [(frozenset((g,)), frozenset((m,))) for g, m in pairs]
    return t_p, t_n, notes


# -- vocabulary, padding, tokens -------------------------------------------------


class Vocabulary:
    """Token ids: ``[PAD]=0, [CLS]=1, [SEP]=2``, then objects, then attributes.

    Object and attribute tokens are prefixed (``o:``/``a:``) so the same raw
    identifier on both sides maps to two tokens.
    """

    def __init__(self, objects, attributes):
        self.objects = tuple(objects)
        self.attributes = tuple(attributes)
        self.tokens = list(SPECIAL_TOKENS)
        self.tokens += ["o:" + o for o in self.objects]
        self.tokens += ["a:" + a for a in self.attributes]
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate identifiers in vocabulary")

    @classmethod
    def from_context(cls, ctx):
        return cls(ctx.objects, ctx.attributes)

    def __len__(self):
        return len(self.tokens)

    @property
    def pad_id(self):
        return 0

    @property
    def cls_id(self):
        return 1

    @property
    def sep_id(self):
        return 2

    def object_id(self, g):
        return 3 + g

    def attribute_id(self, m):
        return 3 + len(self.objects) + m

    def __getitem__(self, token):
        try:
            return self.index[token]
        except KeyError:
            raise KeyError(f"token {token!r} is not in the vocabulary") from None

    def to_dict(self):
        return {"objects": list(self.objects), "attributes": list(self.attributes)}


@dataclass(frozen=True)
class PaddedSample:
    """Object and attribute token sequences, right-padded with ``[PAD]``."""

    x: tuple
    y: tuple
    label: int
    kind: str

    def strip(self):
        return (frozenset(t for t in self.x if t != PAD), frozenset(t for t in self.y if t != PAD))


@dataclass
class SampleSet:
    c_p: list
    c_n: list
    t_p: list
    t_n: list
    samples: list
    l_ext: int
    l_int: int
    notes: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)


def _sequence(members, tokenize_member, length):
    toks = [tokenize_member(i) for i in sorted(members)]
    return tuple(toks) + (PAD,) * (length - len(toks))


def pad_samples(ctx, c_p, c_n, t_p, t_n):
    """Turn the four sample lists into equal-length padded samples.

    ``l_ext``/``l_int`` are the largest object/attribute set sizes among the
    concept samples (1 when there are none, which fits context samples).
    Members are listed in index order, which is token-id order.
    """
    concept = list(c_p) + list(c_n)
    l_ext = max((len(a) for a, _ in concept), default=0) or 1
    l_int = max((len(b) for _, b in concept), default=0) or 1
    out = []
    for group, label, kind in ((c_p, 1, "concept"), (c_n, 0, "concept"), (t_p, 1, "context"), (t_n, 0, "context")):
        for a, b in group:
            out.append(
                PaddedSample(
                    _sequence(a, ctx.object_token, l_ext),
                    _sequence(b, ctx.attribute_token, l_int),
                    label,
                    kind,
                )
            )
    return SampleSet(list(c_p), list(c_n), list(t_p), list(t_n), out, l_ext, l_int)


def tokenize(sample, vocab):
    """``[CLS] x [SEP] y`` as a list of token ids; unknown tokens raise ``KeyError``."""
    return [vocab.cls_id] + [vocab[t] for t in sample.x] + [vocab.sep_id] + [vocab[t] for t in sample.y]


def tokenize_all(samples, vocab):
    """Token-id matrix and label vector for a list of equal-length samples."""
    ids = np.array([tokenize(s, vocab) for s in samples], dtype=np.int64)
    labels = np.array([s.label for s in samples], dtype=np.float32)
    return ids, labels


def prepare_samples(concepts, ctx, k=0.5, distractor_seed=0, context_seed=0):
    """Run the full sample pipeline and return a :class:`SampleSet`.

    With no concepts only context samples are produced.
    """
    notes = []
    if len(concepts):
        sets = build_intermediate_sets(concepts, ctx, k=k, seed=distractor_seed)
        c_p, c_n, more = generate_concept_samples(sets, ctx, seed=derive_seed(distractor_seed, "resample"))
        notes += sets.warnings + more
    else:
        c_p, c_n = [], []
        notes.append("no concepts supplied; only context samples generated")
    t_p, t_n, more = generate_context_samples(ctx, seed=context_seed)
    notes += more
    result = pad_samples(ctx, c_p, c_n, t_p, t_n)
    result.notes = notes
    return result


# -- samples file ---------------------------------------------------------------


def write_samples(path_or_stream, sample_set, meta):
    """JSON lines: a ``{"meta": ...}`` header record, then one record per sample."""
    header = dict(meta)
    header.update(l_ext=sample_set.l_ext, l_int=sample_set.l_int, counts={
        "concept_pos": len(sample_set.c_p),
        "concept_neg": len(sample_set.c_n),
        "context_pos": len(sample_set.t_p),
        "context_neg": len(sample_set.t_n),
    })
    text = io.StringIO()
    text.write(json.dumps({"meta": header}, sort_keys=True) + "\n")
    for s in sample_set.samples:
        text.write(json.dumps({"x": list(s.x), "y": list(s.y), "label": s.label, "kind": s.kind}) + "\n")
    _write_text(path_or_stream, text.getvalue())


def read_samples(source):
    """Return ``(meta, samples)`` from a samples file."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source.read().splitlines()
    if not lines:
        raise ValueError("samples file is empty")
    first = json.loads(lines[0])
    if "meta" not in first:
        raise ValueError("samples file lacks the metadata header record")
    samples = []
    for line in lines[1:]:
        if not line:
            continue
        rec = json.loads(line)
        samples.append(PaddedSample(tuple(rec["x"]), tuple(rec["y"]), int(rec["label"]), rec["kind"]))
    return first["meta"], samples


def sample_pairs_as_ids(ctx, pairs):
    """Map frozenset index pairs back to identifier lists (for debugging and demos)."""
    return [([ctx.objects[g] for g in sorted(a)], [ctx.attributes[m] for m in sorted(b)]) for a, b in pairs]

