"""Bounded closed-set mining: the concepts whose extent and intent sizes fall in a box.

The search is LCM's prefix-preserving closure extension run over attribute
sets.  Extents only shrink and intents only grow along a branch, so the
lower extent bound and the upper intent bound prune whole subtrees, and the
other two bounds only filter what gets reported.
"""

import io
import logging
import math
from dataclasses import dataclass

from .context import (
    FormalConcept,
    _write_text,
    _open_text,
    derive_extent,
    derive_intent,
    extent_bits,
    intent_bits,
    iter_bits,
)

logger = logging.getLogger(__name__)

BRUTEFORCE_MAX_ATTRIBUTES = 20


@dataclass(frozen=True)
class SizeBounds:
    """Inclusive size limits; ``None`` for an upper bound means unbounded."""

    l1: int = 0
    u1: int = None
    l2: int = 0
    u2: int = None

    def __post_init__(self):
        for name in ("l1", "l2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.u1 is not None and self.u1 < self.l1:
            raise ValueError(f"l1={self.l1} exceeds u1={self.u1}")
        if self.u2 is not None and self.u2 < self.l2:
            raise ValueError(f"l2={self.l2} exceeds u2={self.u2}")

    @property
    def max_extent(self):
        return math.inf if self.u1 is None else self.u1

    @property
    def max_intent(self):
        return math.inf if self.u2 is None else self.u2

    def admits(self, extent_size, intent_size):
        return self.l1 <= extent_size <= self.max_extent and self.l2 <= intent_size <= self.max_intent

    def describe(self):
        fmt = lambda v: "inf" if v is None else str(v)  # noqa: E731
        return f"l1={self.l1} u1={fmt(self.u1)} l2={self.l2} u2={fmt(self.u2)}"


UNBOUNDED = SizeBounds()


class ConceptSet:
    """Concepts of one context, in discovery order.

    Iteration yields :class:`FormalConcept` objects.  ``canonical()`` gives
    the serialization order: sorted by the extent's object identifiers,
    then by the intent's attribute identifiers.
    """

    def __init__(self, concepts, context, bounds=UNBOUNDED):
        self.concepts = list(concepts)
        self.context = context
        self.bounds = bounds

    def __len__(self):
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)

    def __contains__(self, concept):
        return concept in set(self.concepts)

    def as_set(self):
        return set(self.concepts)

    def _key(self, c):
        ctx = self.context
        return (sorted(ctx.objects[g] for g in c.extent), sorted(ctx.attributes[m] for m in c.intent))

    def canonical(self):
        return sorted(self.concepts, key=self._key)

    def filter(self, bounds):
        return ConceptSet(
            [c for c in self.concepts if bounds.admits(len(c.extent), len(c.intent))], self.context, bounds
        )

    def __repr__(self):
        return f"ConceptSet({len(self)} concepts, {self.bounds.describe()})"


def mine_significant(ctx, bounds=UNBOUNDED):
    """Return every concept ``(A, B)`` of ``ctx`` with ``bounds.admits(|A|, |B|)``.

    Depth-first over intents, starting at the closure of the empty set.  A
    node ``(A, B)`` reached by adding attribute ``c`` (its core index) is
    extended by each ``b > c`` outside ``B``, highest first, into
    ``(A1, B1) = closure(B + {b})``; the child is kept only if closing added
    nothing below ``b`` and the child can still satisfy ``|A1| >= l1`` and
    ``|B1| <= u2``.  Every closed intent has exactly one such parent, so each
    concept is produced once.
    """
    rows, cols = ctx.rows, ctx.cols
    n_attr = ctx.n_attributes
    l1, l2 = bounds.l1, bounds.l2
    u1, u2 = bounds.max_extent, bounds.max_intent

    root_ext = ctx.all_objects
    root_int = intent_bits(ctx, root_ext)
    out = []
    if root_ext.bit_count() < l1 or root_int.bit_count() > u2:
        return ConceptSet(out, ctx, bounds)

    all_attrs = ctx.all_attributes
    # explicit stack; pushed highest attribute first to mirror the recursive order
    stack = [(root_ext, root_int, -1)]
    while stack:
        ext, itt, core = stack.pop()
        n_ext = ext.bit_count()
        if n_ext <= u1 and itt.bit_count() >= l2:
            out.append(FormalConcept.from_bits(ext, itt))
        children = []
        for b in range(n_attr - 1, core, -1):
            if itt >> b & 1:
                continue
            ext1 = ext & cols[b]
            if ext1.bit_count() < l1:
                continue
            itt1 = all_attrs
            for g in iter_bits(ext1):
                itt1 &= rows[g]
                if itt1 == itt | (1 << b):
                    break
            added = itt1 & ~itt
            if added & ((1 << b) - 1):
                continue
            if itt1.bit_count() > u2:
                continue
            children.append((ext1, itt1, b))
        stack.extend(reversed(children))
    return ConceptSet(out, ctx, bounds)


def enumerate_all_bruteforce(ctx):
    """Close every attribute subset and deduplicate.  Testing oracle only."""
    n_attr = ctx.n_attributes
    if n_attr > BRUTEFORCE_MAX_ATTRIBUTES:
        raise ValueError(
            f"brute-force enumeration needs |M| <= {BRUTEFORCE_MAX_ATTRIBUTES} (got {n_attr}); "
            "it closes all 2^|M| attribute subsets"
        )
    seen = {}
    for subset in range(1 << n_attr):
        a1 = extent_bits(ctx, subset)
        b1 = intent_bits(ctx, a1)
        seen.setdefault(b1, a1)
    return ConceptSet([FormalConcept.from_bits(a, b) for b, a in seen.items()], ctx)


def is_concept(ctx, objects, attributes):
    """True iff ``objects' == attributes`` and ``attributes' == objects``."""
    a = frozenset(int(g) for g in objects)
    b = frozenset(int(m) for m in attributes)
    return derive_intent(ctx, a) == b and derive_extent(ctx, b) == a


# -- concepts file ---------------------------------------------------------------


def write_concepts(path_or_stream, concepts, extra_header=()):
    """Write ``obj,obj,...<TAB>attr,attr,...`` lines in canonical order.

    The first line is a ``#`` header recording the bounds and the context
    digest.
    """
    ctx = concepts.context
    text = io.StringIO()
    text.write(f"# bounds {concepts.bounds.describe()} context_sha256={ctx.digest()}\n")
    for line in extra_header:
        text.write(f"# {line}\n")
    for c in concepts.canonical():
        objs, attrs = concepts._key(c)
        for ident in objs + attrs:
            if "," in ident or "\t" in ident:
                raise ValueError(f"identifier {ident!r} cannot be written to a concepts file")
        text.write(",".join(objs) + "\t" + ",".join(attrs) + "\n")
    _write_text(path_or_stream, text.getvalue())


def read_concepts(source, ctx):
    """Read a concepts file against ``ctx``; bounds are parsed back from the header when present."""
    fh, close = _open_text(source)
    bounds = UNBOUNDED
    concepts = []
    try:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line.startswith("# bounds "):
                bounds = _parse_bounds(line)
                continue
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'objects<TAB>attributes'")
            objs = [ctx.object_index(o) for o in parts[0].split(",") if o]
            attrs = [ctx.attribute_index(a) for a in parts[1].split(",") if a]
            concepts.append(FormalConcept(tuple(sorted(objs)), tuple(sorted(attrs))))
    finally:
        if close:
            fh.close()
    return ConceptSet(concepts, ctx, bounds)


def _parse_bounds(line):
    vals = {}
    for tok in line.split()[2:]:
        key, _, val = tok.partition("=")
        if key in ("l1", "u1", "l2", "u2"):
            vals[key] = None if val == "inf" else int(val)
    return SizeBounds(**vals)

