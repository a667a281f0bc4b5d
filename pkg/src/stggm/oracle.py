"""Exact posteriors by enumeration for tiny problems.

The residual variances are always held fixed, so the coefficients integrate
out in closed form: under neighbourhood ``k`` of node ``i``,

.. math::

    X_i \\sim N\\big(0,\\ \\sigma_i^2 I + X_{-i} T_k X_{-i}'\\big),

with ``T_k`` diagonal holding ``tau1[i]**2`` for selected neighbours and
``tau0[i]**2`` otherwise. Weights are normalized with log-sum-exp.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .errors import GuardExceeded
from .model import DatasetGrid, Hyperparams, MrfParams, as_sigma_array, ordered_pairs, upper_pairs
from .mrf import GridGeometry, binary_configs, mrf_log_prob_table
from .single import neighbor_index

MAX_NODE_P = 12
MAX_GRAPH_P = 5
MAX_JOINT_BITS = 16

LOG_2PI = np.log(2.0 * np.pi)


def _logdet_chol(c) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(c[0]))))


def log_marginal_likelihood(y, Z, sigma2: float, prior_var, method: str = "woodbury") -> float:
    """``log N(y; 0, sigma2 I + Z diag(prior_var) Z')``.

    ``method="dense"`` factorizes the ``n x n`` covariance directly;
    ``"woodbury"`` works in the ``m x m`` precision form.
    """
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    v = np.asarray(prior_var, dtype=float)
    n = y.shape[0]
    if method == "dense":
        C = sigma2 * np.eye(n) + (Z * v) @ Z.T
        c = cho_factor(C, lower=True)
        return -0.5 * (n * LOG_2PI + _logdet_chol(c) + y @ cho_solve(c, y))
    if method != "woodbury":
        raise ValueError("method must be 'dense' or 'woodbury'")
    M = Z.T @ Z + np.diag(sigma2 / v)
    c = cho_factor(M, lower=True)
    zty = Z.T @ y
    quad = (y @ y - zty @ cho_solve(c, zty)) / sigma2
    # det(sigma2 I + Z V Z') = sigma2^(n-m) det(V) det(Z'Z + sigma2 V^-1)
    logdet = (n - len(v)) * np.log(sigma2) + np.sum(np.log(v)) + _logdet_chol(c)
    return -0.5 * (n * LOG_2PI + logdet + quad)


def node_log_marginals(X, i: int, sigma2_i: float, hyper: Hyperparams, method: str = "woodbury"):
    """Marginal log-likelihood of column ``i`` under every neighbourhood.

    Returns ``(configs, loglik)``; ``configs[c, k]`` selects neighbour
    ``others[k]`` where ``others`` are the nodes other than ``i`` in order.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if p > MAX_NODE_P:
        raise GuardExceeded("p=%d exceeds the node enumeration guard %d" % (p, MAX_NODE_P))
    others = np.delete(np.arange(p), i)
    configs = binary_configs(p - 1)
    t1, t0 = hyper.tau1[i] ** 2, hyper.tau0[i] ** 2
    ll = np.array(
        [
            log_marginal_likelihood(X[:, i], X[:, others], sigma2_i, np.where(c, t1, t0), method)
            for c in configs
        ]
    )
    return configs, ll


@dataclass
class NodePosterior:
    configs: np.ndarray
    probs: np.ndarray
    others: np.ndarray

    @property
    def marginals(self) -> np.ndarray:
        """Inclusion probability of each neighbour, aligned with ``others``."""
        return self.probs @ self.configs


def exact_node_posterior(X, i: int, sigma2_i: float, hyper: Hyperparams, method: str = "woodbury") -> NodePosterior:
    """Posterior over the ``2**(p-1)`` neighbourhoods of node ``i`` at fixed ``sigma2_i``."""
    configs, ll = node_log_marginals(X, i, sigma2_i, hyper, method)
    size = configs.sum(axis=1)
    m = configs.shape[1]
    logw = ll + size * np.log(hyper.q) + (m - size) * np.log1p(-hyper.q)
    probs = np.exp(logw - logsumexp(logw))
    return NodePosterior(configs, probs, np.delete(np.arange(np.asarray(X).shape[1]), i))


def _edge_pairs(p: int, symmetric: bool):
    return upper_pairs(p) if symmetric else ordered_pairs(p)


def _row_codes(edge_bits: np.ndarray, p: int, symmetric: bool) -> np.ndarray:
    """Map edge-indicator configurations to per-node neighbourhood codes.

    ``edge_bits`` has shape ``(..., E)``; the result ``(..., p)`` holds, for
    each node, the row index into :func:`binary_configs` of its neighbourhood.
    """
    lead = edge_bits.shape[:-1]
    gam = np.zeros(lead + (p, p), dtype=np.int64)
    ei, ej = _edge_pairs(p, symmetric)
    gam[..., ei, ej] = edge_bits
    if symmetric:
        gam[..., ej, ei] = edge_bits
    others = neighbor_index(p)
    rows = gam[..., np.arange(p)[:, None], others]  # (..., p, p-1)
    weights = 1 << np.arange(p - 2, -1, -1)
    return rows @ weights


def node_tables(X, sigma2, hyper: Hyperparams, method: str = "woodbury") -> np.ndarray:
    """``(p, 2**(p-1))`` table of node marginal log-likelihoods."""
    p = np.asarray(X).shape[1]
    return np.stack([node_log_marginals(X, i, sigma2[i], hyper, method)[1] for i in range(p)])


@dataclass
class GraphPosterior:
    configs: np.ndarray  # (C, E) over upper-triangle pairs
    probs: np.ndarray
    p: int

    @property
    def marginals(self) -> np.ndarray:
        """``(p, p)`` symmetric matrix of edge inclusion probabilities."""
        out = np.zeros((self.p, self.p))
        iu, ju = upper_pairs(self.p)
        m = self.probs @ self.configs
        out[iu, ju] = m
        out[ju, iu] = m
        return out

    def prob_of(self, adjacency) -> float:
        iu, ju = upper_pairs(self.p)
        bits = np.asarray(adjacency)[iu, ju].astype(int)
        code = int(bits @ (1 << np.arange(len(bits) - 1, -1, -1))) if len(bits) else 0
        return float(self.probs[code])


def exact_graph_posterior(X, sigma2, hyper: Hyperparams, method: str = "woodbury") -> GraphPosterior:
    """Posterior over all symmetric graphs at fixed residual variances.

    The likelihood is the product of the node conditionals and each
    unordered pair carries one Bernoulli(q) indicator, which is the target
    of the symmetric-mode sampler.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if p > MAX_GRAPH_P:
        raise GuardExceeded("p=%d exceeds the graph enumeration guard %d" % (p, MAX_GRAPH_P))
    sigma2 = np.asarray(sigma2, dtype=float)
    E = p * (p - 1) // 2
    configs = binary_configs(E)
    tables = node_tables(X, sigma2, hyper, method)
    codes = _row_codes(configs, p, True)
    loglik = tables[np.arange(p), codes].sum(axis=1)
    size = configs.sum(axis=1)
    logw = loglik + size * np.log(hyper.q) + (E - size) * np.log1p(-hyper.q)
    probs = np.exp(logw - logsumexp(logw))
    return GraphPosterior(configs, probs, p)


@dataclass
class JointPosterior:
    configs: np.ndarray  # (C, K, E)
    probs: np.ndarray
    cells: list
    p: int
    symmetric: bool

    def marginals(self) -> dict:
        """Per-cell ``(p, p)`` edge inclusion probability matrices."""
        m = np.tensordot(self.probs, self.configs, axes=1)  # (K, E)
        ei, ej = _edge_pairs(self.p, self.symmetric)
        out = {}
        for k, cell in enumerate(self.cells):
            mat = np.zeros((self.p, self.p))
            mat[ei, ej] = m[k]
            if self.symmetric:
                mat[ej, ei] = m[k]
            out[cell] = mat
        return out


def exact_joint_posterior(
    grid: DatasetGrid,
    sigma2,
    hypers: dict,
    phi: MrfParams,
    symmetric: bool = True,
    method: str = "woodbury",
    order: str = "row",
) -> JointPosterior:
    """Posterior over every joint indicator configuration of a tiny grid.

    Each edge's grid of indicators gets the exact MRF prior, edges are a
    priori independent, and each cell contributes its node marginal
    likelihoods at the fixed ``sigma2`` (shape ``(K, p)`` or ``(p,)``).
    """
    cells = grid.present_cells(order)
    K, p = len(cells), grid.p
    E = p * (p - 1) // 2 if symmetric else p * (p - 1)
    if K * E > MAX_JOINT_BITS:
        raise GuardExceeded("%d indicator bits exceeds the joint guard %d" % (K * E, MAX_JOINT_BITS))
    sig = as_sigma_array(sigma2, K, p)
    locus_index = {b: n for n, b in enumerate(grid.loci)}
    geometry = GridGeometry.from_cells([(locus_index[b], t) for b, t in cells])
    configs = binary_configs(K * E).reshape(-1, K, E)
    logw = np.zeros(len(configs))
    for k, cell in enumerate(cells):
        tables = node_tables(grid[cell], sig[k], hypers[cell], method)
        codes = _row_codes(configs[:, k, :], p, symmetric)
        logw += tables[np.arange(p), codes].sum(axis=1)
    _, table = mrf_log_prob_table(geometry, phi)
    weights = 1 << np.arange(K - 1, -1, -1)
    edge_codes = np.einsum("cke,k->ce", configs.astype(np.int64), weights)
    logw += table[edge_codes].sum(axis=1)
    probs = np.exp(logw - logsumexp(logw))
    return JointPosterior(configs, probs, cells, p, symmetric)


def unconstrained_edge_marginals(X, sigma2, hyper: Hyperparams, rule: str = "or") -> np.ndarray:
    """Exact or/and-rule edge probabilities when each node is selected independently."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    P = np.zeros((p, p))
    for i in range(p):
        post = exact_node_posterior(X, i, sigma2[i], hyper)
        P[i, post.others] = post.marginals
    if rule == "or":
        out = 1.0 - (1.0 - P) * (1.0 - P.T)
    else:
        out = P * P.T
    np.fill_diagonal(out, 0.0)
    return out
