"""
Mining size-bounded concepts
============================

A concept is a maximal biclique: a set of objects and the set of all
attributes they share.  Bounding both sides keeps only the dense,
mid-sized blocks.
"""

import io

from conceptlink import SizeBounds, enumerate_all_bruteforce, load_context, mine_significant

# three objects, three attributes
ctx = load_context(io.StringIO("g1\tm1\ng1\tm2\ng2\tm1\ng2\tm2\ng2\tm3\ng3\tm3\n"))
print(ctx.n_objects, "objects,", ctx.n_attributes, "attributes,", ctx.n_incidences, "edges")

# every concept of the context
for c in mine_significant(ctx).canonical():
    print([ctx.objects[g] for g in c.extent], [ctx.attributes[m] for m in c.intent])

# at least two objects and between one and two attributes
bounds = SizeBounds(l1=2, u1=3, l2=1, u2=2)
found = mine_significant(ctx, bounds)
print(found)

# the brute-force closure of every attribute subset agrees once filtered
assert found.as_set() == enumerate_all_bruteforce(ctx).filter(bounds).as_set()

###############################################################################
# A bigger graph with planted blocks.  Raising the lower bounds prunes the
# search early, which is where the speed comes from.

import time

from conceptlink.synthetic import planted_bicliques

big = planted_bicliques(n_objects=200, n_attributes=200, n_bicliques=10, size=12, seed=0)
for lo in (2, 5, 8):
    t0 = time.perf_counter()
    n = len(mine_significant(big, SizeBounds(lo, None, lo, None)))
    print(f"l1=l2={lo}: {n} concepts in {time.perf_counter() - t0:.2f}s")
