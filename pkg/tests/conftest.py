import io
import random

import pytest

from conceptlink.context import FormalContext, load_context

K1_LINES = "g1\tm1\ng1\tm2\ng2\tm1\ng2\tm2\ng2\tm3\ng3\tm3\n"


@pytest.fixture
def k1():
    """Three objects, three attributes, six incidences."""
    return load_context(io.StringIO(K1_LINES))


def random_context(rng, n_obj, n_attr, density):
    objects = [f"g{i}" for i in range(n_obj)]
    attributes = [f"m{j}" for j in range(n_attr)]
    inc = [(g, m) for g in range(n_obj) for m in range(n_attr) if rng.random() < density]
    return FormalContext(objects, attributes, inc)


def random_contexts(count, max_side=12, densities=(0.1, 0.3, 0.6), seed=12345):
    rng = random.Random(seed)
    out = []
    for i in range(count):
        out.append(random_context(rng, rng.randint(1, max_side), rng.randint(1, max_side), densities[i % len(densities)]))
    return out


def ids(ctx, indices, side):
    names = ctx.objects if side == "o" else ctx.attributes
    return {names[i] for i in indices}
