"""Synthetic bipartite graphs with planted bicliques."""

import numpy as np

from .context import FormalContext


def planted_bicliques(n_objects=200, n_attributes=200, n_bicliques=10, size=12, noise=0.02, seed=0):
    """Plant ``n_bicliques`` complete ``size x size`` blocks on random node subsets.

    ``noise`` adds ``round(noise * planted_edges)`` extra edges uniformly at
    random among the cells not already covered, so noise edges make up that
    fraction of the planted edge count.  Blocks may overlap.
    """
    rng = np.random.default_rng(seed)
    mat = np.zeros((n_objects, n_attributes), dtype=bool)
    for _ in range(n_bicliques):
        objs = rng.choice(n_objects, size=size, replace=False)
        attrs = rng.choice(n_attributes, size=size, replace=False)
        mat[np.ix_(objs, attrs)] = True
    n_noise = int(round(noise * mat.sum()))
    empty = np.flatnonzero(~mat.ravel())
    mat.ravel()[rng.choice(empty, size=min(n_noise, len(empty)), replace=False)] = True
    objects = [f"u{i}" for i in range(n_objects)]
    attributes = [f"v{j}" for j in range(n_attributes)]
    return FormalContext(objects, attributes, zip(*np.nonzero(mat)))
