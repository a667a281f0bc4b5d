"""
The spatio-temporal MRF prior
=============================

One edge's inclusion indicators across a grid of loci and periods follow an
Ising-type prior. Neighbouring cells in space (same period) and time (same
locus, adjacent periods) are rewarded for agreeing.
"""

import numpy as np
from scipy.special import expit

from stggm.model import MrfParams
from stggm.mrf import (
    EdgeGammaGrid,
    GridGeometry,
    exact_mrf_log_prob,
    mh_step,
    mrf_conditional_prob,
    mrf_field,
    neighbor_sums,
    pseudolikelihood_log,
)

# rows are loci, columns periods
g = EdgeGammaGrid(np.array([[1, 1, 0], [1, 0, 0]]))
phi = MrfParams(eta1=-0.5, eta_s=1.0, eta_t=1.0)
print("field at (0, 1):", mrf_field(g, 0, 1, phi))
print("P(on | rest) at (0, 1): %.4f" % mrf_conditional_prob(g, 0, 1, phi))

# %%
# With both couplings at zero the prior is Bernoulli(expit(eta1)) in every cell.
flat = MrfParams(-0.5, 0.0, 0.0)
print("decoupled:", mrf_conditional_prob(g, 1, 2, flat), "=", expit(-0.5))

# %%
# The normalizing constant is intractable on large grids, so the couplings are
# updated against the pseudolikelihood. On a tiny grid both can be computed.
print("log PL %.4f, exact log prob %.4f" % (pseudolikelihood_log(g, phi), exact_mrf_log_prob(g, phi)))

# %%
# Random-walk Metropolis on (eta_s, eta_t) with a uniform prior on [0, 2]. Here
# 200 edges share the same state in both loci, so eta_s is pushed up, while the
# states flip freely over time, which keeps eta_t low.
rng = np.random.default_rng(0)
geo = GridGeometry.from_mask(np.ones((2, 3), bool))
col = (rng.random((3, 200)) < 0.4).astype(np.int8)
states = np.concatenate([col, col])  # (cells, edges), locus-major
sums = neighbor_sums(states, geo)
phi, draws = MrfParams(), []
for it in range(6000):
    phi, _ = mh_step(states, geo, phi, rng, proposal_sd=0.2, sums=sums)
    if it >= 1000:
        draws.append((phi.eta_s, phi.eta_t))
print("posterior means: eta_s %.2f, eta_t %.2f" % tuple(np.mean(draws, axis=0)))
