"""
Who sits in the middle?
=======================

A bot that tweets every petition, surrounded by ordinary users who each
tweet one or two. PageRank on the actor projection puts the bot on top.
"""
import numpy as np

from copetition import bigraph, centrality, project as pj
from copetition.ingest import ItemRecord, ShareRecord, join_dataset

rng = np.random.default_rng(3)
items = [ItemRecord(f"p{i}", f"petition number {i}", 1_400_000_000, int(rng.integers(10, 10**5)))
         for i in range(30)]
shares = []
for i in range(30):
    shares.append(ShareRecord(f"bot{i}", "petitionbot", f"p{i}", 1_400_000_100 + i,
                              follower_count=2500, bio="automatic petition tweets"))
    for k in range(int(rng.integers(1, 4))):
        shares.append(ShareRecord(f"u{i}_{k}", f"user{i}_{k}", f"p{i}", 1_400_001_000 + i,
                                  follower_count=int(rng.integers(5, 500))))
ds = join_dataset(shares, items)
g = bigraph.build(ds)

p = pj.weigh(pj.project(g, "actor"))
scores = centrality.pagerank(p)
print(f"converged in {scores.iterations} iterations, sum of scores {scores.scores.sum():.12f}")

for row in centrality.top_nodes(scores, 5, g, ds):
    print(f"{row['rank']:>2} {row['node_id']:<12} {row['pagerank']:.4f} "
          f"tweets={row['tweets']} unique={row['unique_items']} followers={row['followers']}")
