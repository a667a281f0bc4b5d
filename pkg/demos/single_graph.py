"""
Single-graph neighbourhood selection
====================================

Simulate data from a sparse precision matrix, run the Gibbs sampler,
rank edges by posterior inclusion probability and pick a final graph.
"""

import numpy as np

from stggm import Config, fit_single
from stggm import rng as rngmod
from stggm.evaluate import auc, bic_select, partial_auc, roc_curve, top_k_edges
from stggm.model import center_columns
from stggm.simulate import edge_count, gen_precision, gen_random_graph, sample_mvn

# a 20-node graph with 10% of the pairs connected
rng = rngmod.substream(0, 1)
truth = gen_random_graph(20, 0.1, rng)
theta = gen_precision(truth, rng=rng)
X = center_columns(sample_mvn(theta, 150, rng))
print("true edges:", edge_count(truth))

# %%
# Fit. The slab width defaults to a tenth of each column's standard deviation
# and the spike is a tenth of the slab.
res = fit_single(X, Config(iterations=3000, burn_in=1000, seed=0))
print("posterior draws:", res.n_draws)

# %%
# Edge scores are marginal inclusion probabilities. Compare their ranking with
# the truth.
curve = roc_curve(res.edge_score, truth)
print("AUC %.3f, partial AUC (fp <= #true edges) %.3f" % (auc(curve), partial_auc(curve, curve.n_pos)))

# %%
# Two ways to commit to one graph: keep the K best-scoring edges, or refit a
# precision matrix for each threshold and keep the one with the lowest BIC.
top = top_k_edges(res.edge_score, edge_count(truth))
hits = sum(truth[i, j] for i, j in top)
print("top-%d edges, %d correct" % (len(top), hits))

sel = bic_select(X, res.edge_score, np.linspace(0.05, 0.95, 19))
chosen = np.triu(sel.structure, 1)
print("BIC threshold %.2f keeps %d edges, %d correct" % (sel.threshold, chosen.sum(), (chosen & truth).sum()))
