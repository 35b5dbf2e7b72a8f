"""Formal contexts (bipartite networks), derivation operators and data splits.

A formal context ``(G, M, I)`` is stored as two lists of Python ``int``
bitsets: ``rows[g]`` holds the attributes of object ``g`` and ``cols[m]``
holds the objects carrying attribute ``m``.  Both derivation directions are
then a handful of big-integer ANDs, which is what the concept miner spends
its time on.
"""

import hashlib
import io
import logging
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng

logger = logging.getLogger(__name__)

OBJECT_PREFIX = "o:"
ATTRIBUTE_PREFIX = "a:"


class ContextParseError(ValueError):
    """Raised for malformed context files."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def iter_bits(x):
    """Yield the indices of the set bits of ``x`` in increasing order."""
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def to_bitset(indices, size, what="index"):
    bits = 0
    for i in indices:
        i = int(i)
        if not 0 <= i < size:
            raise IndexError(f"{what} {i} out of range [0, {size})")
        bits |= 1 << i
    return bits


class FormalContext:
    """An immutable formal context.

    Parameters
    ----------
    objects, attributes : sequence of str
        Identifiers, in index order.  Must be unique within each side; the
        same string may appear on both sides.
    incidence : iterable of (int, int)
        ``(object_index, attribute_index)`` pairs.
    """

    __slots__ = ("objects", "attributes", "rows", "cols", "_object_index", "_attribute_index", "_n_incidences")

    def __init__(self, objects, attributes, incidence=()):
        objects = tuple(str(o) for o in objects)
        attributes = tuple(str(a) for a in attributes)
        if len(set(objects)) != len(objects):
            raise ValueError("object identifiers must be unique")
        if len(set(attributes)) != len(attributes):
            raise ValueError("attribute identifiers must be unique")
        n_obj, n_attr = len(objects), len(attributes)
        rows = [0] * n_obj
        cols = [0] * n_attr
        for g, m in incidence:
            g, m = int(g), int(m)
            if not (0 <= g < n_obj and 0 <= m < n_attr):
                raise IndexError(f"incidence ({g}, {m}) out of range for a {n_obj}x{n_attr} context")
            rows[g] |= 1 << m
            cols[m] |= 1 << g
        self.objects = objects
        self.attributes = attributes
        self.rows = tuple(rows)
        self.cols = tuple(cols)
        self._object_index = {o: i for i, o in enumerate(objects)}
        self._attribute_index = {a: i for i, a in enumerate(attributes)}
        self._n_incidences = sum(r.bit_count() for r in rows)

    @classmethod
    def from_pairs(cls, pairs, objects=None, attributes=None):
        """Build a context from ``(object_id, attribute_id)`` string pairs.

        Identifiers are registered in first-appearance order, after any
        identifiers given explicitly through ``objects``/``attributes``.
        """
        obj_index, attr_index = {}, {}
        for o in objects or ():
            obj_index.setdefault(str(o), len(obj_index))
        for a in attributes or ():
            attr_index.setdefault(str(a), len(attr_index))
        inc = []
        for o, a in pairs:
            g = obj_index.setdefault(str(o), len(obj_index))
            m = attr_index.setdefault(str(a), len(attr_index))
            inc.append((g, m))
        return cls(list(obj_index), list(attr_index), inc)

    # -- sizes and lookup ---------------------------------------------------

    @property
    def n_objects(self):
        return len(self.objects)

    @property
    def n_attributes(self):
        return len(self.attributes)

    @property
    def n_incidences(self):
        return self._n_incidences

    @property
    def all_objects(self):
        return (1 << self.n_objects) - 1

    @property
    def all_attributes(self):
        return (1 << self.n_attributes) - 1

    def object_index(self, obj):
        try:
            return self._object_index[obj]
        except KeyError:
            raise KeyError(f"unknown object {obj!r}") from None

    def attribute_index(self, attr):
        try:
            return self._attribute_index[attr]
        except KeyError:
            raise KeyError(f"unknown attribute {attr!r}") from None

    def has_object(self, obj):
        return obj in self._object_index

    def has_attribute(self, attr):
        return attr in self._attribute_index

    def has_edge(self, g, m):
        return bool(self.rows[g] >> m & 1)

    def object_token(self, g):
        return OBJECT_PREFIX + self.objects[g]

    def attribute_token(self, m):
        return ATTRIBUTE_PREFIX + self.attributes[m]

    # -- views --------------------------------------------------------------

    def incidence(self):
        """Return the incidence relation as a frozenset of index pairs."""
        return frozenset(self.iter_incidence())

    def iter_incidence(self):
        """Yield ``(g, m)`` pairs in row-major order."""
        for g, row in enumerate(self.rows):
            for m in iter_bits(row):
                yield g, m

    def edges(self):
        """Return the incidence as ``(object_id, attribute_id)`` pairs, row-major."""
        return [(self.objects[g], self.attributes[m]) for g, m in self.iter_incidence()]

    def object_neighbors(self, g):
        return list(iter_bits(self.rows[g]))

    def attribute_neighbors(self, m):
        return list(iter_bits(self.cols[m]))

    def to_dense(self, dtype=np.float64):
        mat = np.zeros((self.n_objects, self.n_attributes), dtype=dtype)
        for g, m in self.iter_incidence():
            mat[g, m] = 1
        return mat

    def to_sparse(self):
        from scipy import sparse

        pairs = list(self.iter_incidence())
        if pairs:
            r, c = np.array(pairs, dtype=np.int64).T
        else:
            r = c = np.zeros(0, dtype=np.int64)
        return sparse.csr_matrix(
            (np.ones(len(r)), (r, c)), shape=(self.n_objects, self.n_attributes)
        )

    def without(self, pairs):
        """Return a copy with the given index pairs removed; node sets are kept."""
        drop = set(pairs)
        return FormalContext(self.objects, self.attributes, (p for p in self.iter_incidence() if p not in drop))

    def digest(self):
        """SHA-256 of the canonical edge list; identifies a context in file headers."""
        h = hashlib.sha256()
        for o, a in sorted(self.edges()):
            h.update(f"{o}\t{a}\n".encode("utf-8"))
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, FormalContext):
            return NotImplemented
        return (self.objects, self.attributes, self.rows) == (other.objects, other.attributes, other.rows)

    def __hash__(self):
        return hash((self.objects, self.attributes, self.rows))

    def __repr__(self):
        return f"FormalContext(objects={self.n_objects}, attributes={self.n_attributes}, incidences={self.n_incidences})"


# -- derivation operators ----------------------------------------------------


def _check_bits(bits, size, what):
    if bits < 0 or bits >> size:
        raise IndexError(f"{what} set contains an index outside [0, {size})")


def intent_bits(ctx, extent):
    """Attributes shared by every object of the bitset ``extent``."""
    _check_bits(extent, ctx.n_objects, "object")
    rows = ctx.rows
    out = ctx.all_attributes
    for g in iter_bits(extent):
        out &= rows[g]
        if not out:
            break
    return out


def extent_bits(ctx, intent):
    """Objects having every attribute of the bitset ``intent``."""
    _check_bits(intent, ctx.n_attributes, "attribute")
    cols = ctx.cols
    out = ctx.all_objects
    for m in iter_bits(intent):
        out &= cols[m]
        if not out:
            break
    return out


def derive_intent(ctx, objects):
    """Return ``{m | (g, m) in I for all g in objects}`` as a frozenset of indices."""
    bits = to_bitset(objects, ctx.n_objects, "object index")
    return frozenset(iter_bits(intent_bits(ctx, bits)))


def derive_extent(ctx, attributes):
    """Return ``{g | (g, m) in I for all m in attributes}`` as a frozenset of indices."""
    bits = to_bitset(attributes, ctx.n_attributes, "attribute index")
    return frozenset(iter_bits(extent_bits(ctx, bits)))


@dataclass(frozen=True, order=True)
class FormalConcept:
    """An (extent, intent) pair of sorted index tuples."""

    extent: tuple
    intent: tuple

    @classmethod
    def from_bits(cls, extent, intent):
        return cls(tuple(iter_bits(extent)), tuple(iter_bits(intent)))

    def object_ids(self, ctx):
        return [ctx.objects[g] for g in self.extent]

    def attribute_ids(self, ctx):
        return [ctx.attributes[m] for m in self.intent]


def closure(ctx, attributes):
    """Close an attribute set: ``A1 = B'``, ``B1 = A1'``; returns the concept ``(A1, B1)``."""
    bits = to_bitset(attributes, ctx.n_attributes, "attribute index")
    a1 = extent_bits(ctx, bits)
    return FormalConcept.from_bits(a1, intent_bits(ctx, a1))


# -- file I/O ----------------------------------------------------------------


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    return source, False


def read_pairs(source):
    """Parse ``object<TAB>attribute`` lines; ``#`` lines and blank lines are skipped.

    Returns a list of ``(object_id, attribute_id)`` tuples in file order,
    duplicates included.
    """
    fh, close = _open_text(source)
    try:
        pairs = []
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ContextParseError(f"expected 'object<TAB>attribute', got {len(parts) - 1} tabs", lineno)
            o, a = parts
            if not o or not a:
                raise ContextParseError("empty identifier", lineno)
            pairs.append((o, a))
        return pairs
    finally:
        if close:
            fh.close()


def load_context(source, objects=None, attributes=None):
    """Load a context from a path or text stream of ``object<TAB>attribute`` lines.

    ``objects``/``attributes`` optionally pre-register a node universe so
    that nodes left isolated by an edge split keep their identifiers.
    """
    pairs = read_pairs(source)
    if not pairs:
        raise ContextParseError("context is empty; at least one incidence is required")
    return FormalContext.from_pairs(dict.fromkeys(pairs), objects=objects, attributes=attributes)


def write_pairs(path_or_stream, pairs, header=()):
    text = io.StringIO()
    for line in header:
        text.write(f"# {line}\n")
    for o, a in pairs:
        text.write(f"{o}\t{a}\n")
    _write_text(path_or_stream, text.getvalue())


def write_context(path_or_stream, ctx, header=()):
    write_pairs(path_or_stream, ctx.edges(), header)


def _write_text(path_or_stream, text):
    if isinstance(path_or_stream, (str, os.PathLike)):
        with open(path_or_stream, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        path_or_stream.write(text)


# -- train/target split and test set ---------------------------------------------


@dataclass
class SplitResult:
    input_context: FormalContext
    removed_edges: list
    seed: int

    def removed_ids(self):
        ctx = self.input_context
        return [(ctx.objects[g], ctx.attributes[m]) for g, m in self.removed_edges]


def removal_count(n_incidences, fraction):
    # round half up; Python's round() is banker's rounding
    return int(math.floor(fraction * n_incidences + 0.5))


def split_input_target(ctx, fraction, seed):
    """Remove exactly ``round(fraction * |I|)`` uniformly chosen edges.

    The original context plays the role of the prediction target; the
    returned ``input_context`` keeps every object and attribute.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = removal_count(ctx.n_incidences, fraction)
    if n < 1:
        raise ValueError(
            f"fraction {fraction} of {ctx.n_incidences} incidences rounds to 0 removals; use a larger fraction"
        )
    edges = list(ctx.iter_incidence())
    rng = make_rng(seed)
    picked = rng.choice(len(edges), size=n, replace=False)
    removed = [edges[i] for i in picked]
    return SplitResult(ctx.without(removed), removed, int(seed))


@dataclass
class TestSet:
    positives: list
    negatives: list
    warnings: list = field(default_factory=list)

    __test__ = False  # not a pytest class

    def labeled(self):
        return [(g, m, 1) for g, m in self.positives] + [(g, m, 0) for g, m in self.negatives]


def generate_test_set(split, t_n, seed, max_draws_per_positive=1000):
    """Pair the removed edges with as many uniformly drawn non-edges.

    A negative ``(g, m)`` must be absent from the original incidence (input
    edges plus removed edges), from the negatives drawn so far, and from
    ``t_n``, the context-sample negatives used in training.  ``t_n`` may hold
    index pairs or ``({g}, {m})`` set pairs.
    """
    ctx = split.input_context
    positives = list(split.removed_edges)
    if not positives:
        raise ValueError("split has no removed edges")
    excluded = set(ctx.iter_incidence())
    excluded.update(positives)
    for pair in t_n:
        g, m = pair
        if not isinstance(g, (int, np.integer)):
            (g,), (m,) = g, m
        excluded.add((int(g), int(m)))

    n_obj, n_attr = ctx.n_objects, ctx.n_attributes
    available = n_obj * n_attr - len(excluded)
    target = len(positives)
    rng = make_rng(seed)
    negatives, seen = [], set()
    draws, max_draws = 0, max_draws_per_positive * target
    while len(negatives) < target and len(seen) < available and draws < max_draws:
        g = int(rng.integers(n_obj))
        m = int(rng.integers(n_attr))
        draws += 1
        if (g, m) in excluded or (g, m) in seen:
            continue
        seen.add((g, m))
        negatives.append((g, m))
    notes = []
    if len(negatives) < target:
        msg = f"only {len(negatives)} test negatives drawn for {target} positives (non-edges exhausted)"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    return TestSet(positives, negatives, notes)


def write_test_set(path_or_stream, ctx, test_set, header=()):
    text = io.StringIO()
    for line in header:
        text.write(f"# {line}\n")
    for g, m, label in test_set.labeled():
        text.write(f"{ctx.objects[g]}\t{ctx.attributes[m]}\t{label}\n")
    _write_text(path_or_stream, text.getvalue())


def read_labeled_pairs(source):
    """Read ``object<TAB>attribute<TAB>label`` lines into ``(obj, attr, label)`` tuples."""
    fh, close = _open_text(source)
    try:
        out = []
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ContextParseError("expected 'object<TAB>attribute<TAB>{0,1}'", lineno)
            out.append((parts[0], parts[1], int(parts[2])))
        return out
    finally:
        if close:
            fh.close()
