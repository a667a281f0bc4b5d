"""
Synthetic designs
=================

Random graphs, graph chains that replace a fixed share of edges per step,
and diagonally dominant precision matrices on a given support.
"""

import numpy as np

from stggm import SimSpec, build_experiment
from stggm.simulate import edge_count, evolve_hmm, gen_precision, gen_random_graph

rng = np.random.default_rng(0)
g0 = gen_random_graph(50, 0.1, rng)
chain = evolve_hmm(g0, 0.2, 5, rng)
print("edges per period:", [edge_count(g) for g in chain])
print("kept between periods:", [int(np.triu(a & b, 1).sum()) for a, b in zip(chain, chain[1:])])

theta = gen_precision(g0, rng=rng)
off = np.abs(theta[np.triu(g0, 1).astype(bool)])
print("min eigenvalue %.3f, |off-diagonal| in [%.3f, %.3f]" % (np.linalg.eigvalsh(theta).min(), off.min(), off.max()))

# %%
# Full experiments: a temporal chain, parallel loci perturbed from one graph,
# and a grid where every period's base graph is perturbed per locus.
for design, kw in (
    ("temporal", dict(n_periods=4)),
    ("parallel", dict(n_loci=3, n_periods=1, change_fraction=0.5)),
    ("spatiotemporal", dict(n_loci=2, n_periods=3, perturbation_fraction=0.1)),
):
    exp = build_experiment(SimSpec(p=30, n=50, design=design, seed=1, **kw))
    print("%-14s cells %s" % (design, [c for c in exp.grid.present_cells()]))
