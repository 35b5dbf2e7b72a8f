"""Baseline link scorers: neighbourhood heuristics and truncated SVD.

The heuristics are adapted to bipartite graphs by summing an object-object
similarity over the objects already linked to the candidate attribute::

    score(u, v) = sum over w in N(v) - {u} of sim(u, w)

where ``sim`` compares the attribute neighbourhoods of ``u`` and ``w``.
"""

import io
import math

import numpy as np

from .context import _write_text

HEURISTICS = ("cn", "jc", "aa", "ra")


def _attribute_weights(ctx, kind):
    deg = np.array([c.bit_count() for c in ctx.cols], dtype=np.float64)
    if kind == "aa":
        w = np.zeros_like(deg)
        ok = deg > 1  # log(0) and log(1) are excluded
        w[ok] = 1.0 / np.log(deg[ok])
        return w
    if kind == "ra":
        w = np.zeros_like(deg)
        ok = deg > 0
        w[ok] = 1.0 / deg[ok]
        return w
    return None


class HeuristicScorer:
    """Scores object-attribute pairs with CN, JC, AA or RA.

    Similarities for one object against all others are computed with a
    sparse product and cached per object, so scoring a test set costs one
    product per distinct object.
    """

    def __init__(self, ctx, kind):
        kind = kind.lower()
        if kind not in HEURISTICS:
            raise ValueError(f"unknown heuristic {kind!r}; expected one of {HEURISTICS}")
        self.ctx = ctx
        self.kind = kind
        self.matrix = ctx.to_sparse()
        self.matrix_t = self.matrix.T.tocsr()
        self.degree = np.asarray(self.matrix.sum(axis=1)).ravel()
        w = _attribute_weights(ctx, kind)
        self.weighted = self.matrix if w is None else self.matrix.multiply(w[None, :]).tocsr()
        self._cache = {}

    def similarities(self, u):
        """``sim(u, w)`` for every object ``w``."""
        if u in self._cache:
            return self._cache[u]
        row = self.weighted[u].toarray().ravel()
        # for cn/jc ``weighted`` is the plain 0/1 matrix
        sims = self.matrix @ row
        if self.kind == "jc":
            union = self.degree[u] + self.degree - sims
            sims = np.divide(sims, union, out=np.zeros_like(sims), where=union > 0)
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[u] = sims
        return sims

    def score_index(self, g, m):
        sims = self.similarities(g)
        neigh = self.ctx.attribute_neighbors(m)
        return float(sum(sims[w] for w in neigh if w != g))

    def score(self, obj, attr):
        return self.score_index(self.ctx.object_index(obj), self.ctx.attribute_index(attr))

    def score_pairs(self, pairs):
        """Scores for ``(object_id, attribute_id)`` pairs."""
        return np.array([self.score(o, a) for o, a in pairs], dtype=np.float64)


def score_heuristic(ctx, obj, attr, kind):
    """Single-pair convenience wrapper around :class:`HeuristicScorer`."""
    return HeuristicScorer(ctx, kind).score(obj, attr)


class SVDScorer:
    """Entries of the rank-``k`` truncated SVD reconstruction of the incidence matrix."""

    def __init__(self, ctx, rank=64):
        lim = min(ctx.n_objects, ctx.n_attributes)
        if not 1 <= rank <= lim:
            raise ValueError(f"rank must lie in [1, {lim}], got {rank}")
        self.ctx = ctx
        self.rank = rank
        if lim <= 2000 or rank >= lim - 1:
            mat = ctx.to_dense()
            u, s, vt = np.linalg.svd(mat, full_matrices=False)
        else:
            from scipy.sparse.linalg import svds

            mat = ctx.to_sparse()
            v0 = np.full(min(mat.shape), 1.0 / math.sqrt(min(mat.shape)))
            u, s, vt = svds(mat, k=rank, v0=v0)
            order = np.argsort(-s)
            u, s, vt = u[:, order], s[order], vt[order]
        self.left = u[:, :rank] * s[:rank]
        self.right = vt[:rank].T

    def score_index(self, g, m):
        return float(self.left[g] @ self.right[m])

    def score(self, obj, attr):
        return self.score_index(self.ctx.object_index(obj), self.ctx.attribute_index(attr))

    def score_pairs(self, pairs):
        return np.array([self.score(o, a) for o, a in pairs], dtype=np.float64)

    def reconstruction(self):
        return self.left @ self.right.T


def score_mf_svd(ctx, rank, obj, attr):
    return SVDScorer(ctx, rank).score(obj, attr)


def write_predictions(path_or_stream, rows):
    """``object<TAB>attribute<TAB>score<TAB>label`` lines."""
    text = io.StringIO()
    for obj, attr, score, label in rows:
        text.write(f"{obj}\t{attr}\t{score:.10g}\t{int(label)}\n")
    _write_text(path_or_stream, text.getvalue())
