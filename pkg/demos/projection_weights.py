"""
Co-sharing projections and their weights
========================================

Three actors, a handful of petitions. We project onto the actor side and
look at how the normalized PMI weight ranks the pairs.
"""
import numpy as np

from copetition import bigraph, project as pj

# (actor, item) tweets; actor 0 tweets item 0 twice, which counts once
pairs = [(0, 0), (0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (2, 2), (3, 2)]
g = bigraph.from_incidences([a for a, _ in pairs], [i for _, i in pairs],
                            ["ana", "ben", "cy", "dee"], ["p0", "p1", "p2"])

p = pj.weigh(pj.project(g, "actor"))
print("total co-count W =", p.total_co_mass)
for a, b, c, w in zip(p.a, p.b, p.co_count, p.weight):
    print(f"  {p.labels[a]:>4} - {p.labels[b]:<4} co_count={c}  weight={w:+.4f}")

# cy and dee only ever meet on p2, but cy also shares p1 with others,
# so their pair is informative without being exclusive
kept = pj.filter_edges(p, pj.FilterSpec(0.5, drop_isolated=True))
print("top half:", [(p.labels[a], p.labels[b]) for a, b in zip(kept.a, kept.b)])
print("nodes left:", [p.labels[n] for n in kept.nodes])

# an exclusive pair always scores exactly 1
solo = bigraph.from_incidences([0, 1], [0, 0], ["x", "y"], ["only"])
print("exclusive pair weight:", pj.weigh(pj.project(solo, "actor")).weight)
np.testing.assert_allclose(pj.weigh(pj.project(solo, "actor")).weight, 1.0)
