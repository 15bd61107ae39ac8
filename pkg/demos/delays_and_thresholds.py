"""
How long after creation are petitions tweeted?
==============================================

Half the tweets come minutes after a petition appears and half come months
later. The log-binned delay histogram shows two humps.
"""
import numpy as np

from copetition import stats
from copetition.synth import PlantedSpec, generate

ds, truth = generate(PlantedSpec(seed=4, fast_median=600, slow_median=60 * 86400))
d = stats.delay_histogram(ds, per_decade=4)
h = d.histogram
smooth = stats.smooth3(h.counts)
for lo, c, s in zip(h.edges[:-1], h.counts, smooth):
    if c:
        print(f"{lo:>12.0f}s {c:>5} {'#' * int(s // 20)}")
print("modes start at", [f"{h.edges[m]:.0f}s" for m in d.modes])
print("per-petition median delay vs tweets (log-log):", round(d.correlation, 4))

tp = stats.threshold_profile(ds)
print(f"median signatures per tweet {tp.median:.0f}; "
      f"share of tweets on petitions >= 10k: {tp.fraction_between(1e4, np.inf):.3f}")
