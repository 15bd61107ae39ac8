"""
Do more tweets mean more signatures?
====================================

Signatures are generated log-linearly in tweet counts with elasticity 1.13.
The five regressions on the per-petition table should find it again.
"""
import numpy as np

from copetition import bigraph, stats
from copetition.synth import PlantedSpec, generate

spec = PlantedSpec(k=4, actors_per_community=60, items_per_community=250, p_in=0.05, p_out=0.002,
                   beta=1.13, sigma=0.1, seed=1)
ds, truth = generate(spec)
st = stats.petition_stats(bigraph.build(ds), ds)
print(f"{len(st)} petitions; median tweets {np.median(st.tweets)}, median signatures {np.median(st.signatures)}")

print("log-log correlations:")
print("  signatures vs tweets", round(stats.loglog_corr(st.signatures, st.tweets), 4))
print("  signatures vs users ", round(stats.loglog_corr(st.signatures, st.users), 4))

for name, r in stats.signature_regressions(st).items():
    key = r.names[1]
    print(f"{name}: {key} = {r[key]:.4f} (se {r.stderr[1]:.4f}), R^2 = {r.r_squared:.3f}, "
          f"10% more -> {stats.elasticity_response(r[key]):+.2f}% signatures")

# users add almost nothing once tweets are in the model (R2 vs R1), and the
# audience sizes explain much less of the variance than raw tweet counts
