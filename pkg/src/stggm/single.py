"""Blocked Gibbs sampler for Bayesian neighborhood selection on one graph.

Each node ``i`` is regressed on the remaining ``p - 1`` nodes with a
spike-and-slab prior on the coefficients ``beta[i, j]``:

.. math::

    \\beta_{ij} \\mid \\gamma_{ij} \\sim (1 - \\gamma_{ij}) N(0, \\tau_{i0}^2)
        + \\gamma_{ij} N(0, \\tau_{i1}^2), \\qquad \\gamma_{ij} \\sim \\mathrm{Bern}(q)

and a flat prior on the residual variance ``sigma2[i]``. A sweep updates
every coefficient row, then every residual variance, then the indicators.
Coefficient rows are drawn through a Cholesky factorization followed by
forward and backward substitution; no matrix inverse is formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import rng as rngmod
from .errors import CholeskyFailure, DegenerateResidual
from .model import Hyperparams, Schedule, as_sigma_array, ordered_pairs, upper_pairs

LOG_2PI = np.log(2.0 * np.pi)
# relative jitter added on the single Cholesky retry
JITTER = 1e-8
# rows per batched Cholesky call are capped so the stacked Gram blocks stay small
_BATCH_ELEMENTS = 4_000_000


def neighbor_index(p: int) -> np.ndarray:
    """``(p, p - 1)`` array; row ``i`` lists every node except ``i``."""
    idx = np.tile(np.arange(p), (p, 1))
    mask = ~np.eye(p, dtype=bool)
    return idx[mask].reshape(p, p - 1)


def build_shrinkage_diag(gamma_row, sigma2_i: float, hyper: Hyperparams, i: int) -> np.ndarray:
    """Diagonal of the shrinkage matrix for row ``i``.

    Entry ``j`` is ``sigma2_i / tau1[i]**2`` when ``gamma_row[j] == 1`` and
    ``sigma2_i / tau0[i]**2`` otherwise.
    """
    if not sigma2_i > 0:
        raise ValueError("sigma2_i must be positive")
    gamma_row = np.asarray(gamma_row, dtype=bool)
    tau = np.where(gamma_row, hyper.tau1[i], hyper.tau0[i])
    return sigma2_i / tau**2


# -- triangular algebra, batched over a leading axis -------------------------

def cholesky_lower(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factors of a stack of SPD matrices, one jittered retry."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    m = A.shape[-1]
    trace = np.trace(A, axis1=-2, axis2=-1)
    A = A.copy()
    diag = np.einsum("...ii->...i", A)
    diag += (JITTER * trace / m)[..., None]
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(
            "Gram-plus-shrinkage matrix is not positive definite; "
            "hyperparameters are probably mis-scaled (try a smaller l or q)"
        ) from exc


def forward_substitution(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L x = b`` for lower-triangular ``L`` of shape ``(..., m, m)``."""
    m = L.shape[-1]
    x = np.empty_like(b)
    for k in range(m):
        acc = np.einsum("...j,...j->...", L[..., k, :k], x[..., :k])
        x[..., k] = (b[..., k] - acc) / L[..., k, k]
    return x


def backward_substitution_t(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L' x = b`` for lower-triangular ``L``."""
    m = L.shape[-1]
    x = np.empty_like(b)
    for k in range(m - 1, -1, -1):
        acc = np.einsum("...j,...j->...", L[..., k + 1:, k], x[..., k + 1:])
        x[..., k] = (b[..., k] - acc) / L[..., k, k]
    return x


def _beta_from_factor(L, xty, sigma, z):
    # beta = R^{-1} ((R^{-1})' X'y + sigma z) with R = L'
    w = forward_substitution(L, xty)
    return backward_substitution_t(L, w + sigma[..., None] * z)


def sample_beta_row(X, i: int, D_diag, sigma2_i: float, rng=None, z=None) -> np.ndarray:
    """Draw row ``i`` of the coefficient matrix from its full conditional.

    The target is ``N(A^{-1} X_G' X_i, sigma2_i A^{-1})`` with
    ``A = X_G' X_G + D``. Pass ``z`` to supply the standard-normal vector
    explicitly instead of drawing it from ``rng``.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    others = np.delete(np.arange(p), i)
    Xg = X[:, others]
    A = Xg.T @ Xg + np.diag(np.asarray(D_diag, dtype=float))
    xty = Xg.T @ X[:, i]
    if z is None:
        z = rng.standard_normal(p - 1)
    L = cholesky_lower(A[None])
    return _beta_from_factor(L, xty[None], np.array([np.sqrt(sigma2_i)]), np.asarray(z, float)[None])[0]


def residual_sum_of_squares(X, i: int, beta_row) -> float:
    X = np.asarray(X, dtype=float)
    others = np.delete(np.arange(X.shape[1]), i)
    r = X[:, i] - X[:, others] @ np.asarray(beta_row, dtype=float)
    return float(r @ r)


def _check_rss(rss: np.ndarray, scale: np.ndarray) -> None:
    bad = ~(rss > 1e-14 * np.maximum(scale, np.finfo(float).tiny))
    if np.any(bad):
        raise DegenerateResidual(
            "zero residual sum of squares for node(s) %s; n is too small or columns are collinear"
            % np.flatnonzero(bad).tolist()
        )


def sample_sigma2(X, i: int, beta_row, rng, size=None):
    """Draw ``sigma2[i]`` from ``InvGamma(n / 2, RSS / 2)``.

    Returns a float, or an array of ``size`` independent draws.
    """
    X = np.asarray(X, dtype=float)
    rss = np.array([residual_sum_of_squares(X, i, beta_row)])
    _check_rss(rss, np.array([X[:, i] @ X[:, i]]))
    draw = 0.5 * rss[0] / rng.gamma(0.5 * X.shape[0], size=size)
    return float(draw) if size is None else draw


def slab_log_ratio(beta, tau1, tau0):
    """``log N(beta; 0, tau1^2) - log N(beta; 0, tau0^2)``, elementwise."""
    beta = np.asarray(beta, dtype=float)
    return np.log(tau0 / tau1) - 0.5 * beta**2 * (1.0 / tau1**2 - 1.0 / tau0**2)


def gamma_log_odds_single(beta_ij, hyper: Hyperparams, i: int):
    """Conditional log-odds of ``gamma[i, j] = 1`` given ``beta[i, j]``."""
    return hyper.prior_log_odds + slab_log_ratio(beta_ij, hyper.tau1[i], hyper.tau0[i])


def coefficient_log_ratios(beta: np.ndarray, tau1, tau0) -> np.ndarray:
    """Matrix of slab-vs-spike log density ratios; row ``i`` uses ``tau[i]``."""
    tau1 = np.asarray(tau1)[:, None]
    tau0 = np.asarray(tau0)[:, None]
    return slab_log_ratio(beta, tau1, tau0)


def edge_log_ratios(beta: np.ndarray, tau1, tau0, symmetric: bool) -> np.ndarray:
    """Likelihood log-ratios per indicator variable.

    Symmetric mode has one variable per unordered pair (upper triangle,
    row-major) and sums the two directions; otherwise one variable per
    ordered pair.
    """
    llr = coefficient_log_ratios(beta, tau1, tau0)
    if symmetric:
        iu, ju = upper_pairs(beta.shape[0])
        return llr[iu, ju] + llr[ju, iu]
    io, jo = ordered_pairs(beta.shape[0])
    return llr[io, jo]


def edges_to_matrix(values, p: int, symmetric: bool, dtype=np.int8) -> np.ndarray:
    out = np.zeros((p, p), dtype=dtype)
    if symmetric:
        iu, ju = upper_pairs(p)
        out[iu, ju] = values
        out[ju, iu] = values
    else:
        io, jo = ordered_pairs(p)
        out[io, jo] = values
    return out


def sample_gamma_single(beta: np.ndarray, hyper: Hyperparams, symmetric: bool, rng) -> np.ndarray:
    """Draw the full indicator matrix given the coefficient matrix.

    ``beta`` is a ``(p, p)`` matrix whose diagonal is ignored. Returns an
    ``int8`` matrix with a zero diagonal.
    """
    beta = np.asarray(beta, dtype=float)
    p = beta.shape[0]
    lo = hyper.prior_log_odds + edge_log_ratios(beta, hyper.tau1, hyper.tau0, symmetric)
    draws = rng.random(lo.shape) < expit(lo)
    return edges_to_matrix(draws, p, symmetric)


class NodeRegressions:
    """Per-dataset machinery for the coefficient and residual-variance blocks.

    Shared by the single-graph and the joint sampler: one instance per
    observation matrix.
    """

    def __init__(self, X, hyper: Hyperparams):
        X = np.asarray(X, dtype=float)
        self.X = X
        self.n, self.p = X.shape
        self.hyper = hyper
        self.gram = X.T @ X
        self.others = neighbor_index(self.p)
        self.rows = np.arange(self.p)[:, None]
        self.xty = self.gram[self.others, self.rows]
        self.col_ss = np.diag(self.gram).copy()
        m = self.p - 1
        self.chunk = max(1, _BATCH_ELEMENTS // max(1, m * m))

    def initial_sigma2(self) -> np.ndarray:
        return self.X.var(axis=0, ddof=1)

    def beta_matrix(self, coef: np.ndarray) -> np.ndarray:
        """Scatter ``(p, p - 1)`` coefficient rows into a ``(p, p)`` matrix."""
        out = np.zeros((self.p, self.p))
        out[self.rows, self.others] = coef
        return out

    def draw_beta(self, gamma: np.ndarray, sigma2: np.ndarray, rng) -> np.ndarray:
        """All coefficient rows, drawn row-independently. Returns ``(p, p - 1)``."""
        p, m = self.p, self.p - 1
        g = gamma[self.rows, self.others].astype(bool)
        tau = np.where(g, self.hyper.tau1[:, None], self.hyper.tau0[:, None])
        d = sigma2[:, None] / tau**2
        z = rng.standard_normal((p, m))
        sigma = np.sqrt(sigma2)
        coef = np.empty((p, m))
        for start in range(0, p, self.chunk):
            sl = slice(start, start + self.chunk)
            o = self.others[sl]
            A = self.gram[o[:, :, None], o[:, None, :]]
            A[:, np.arange(m), np.arange(m)] += d[sl]
            L = cholesky_lower(A)
            coef[sl] = _beta_from_factor(L, self.xty[sl], sigma[sl], z[sl])
        return coef

    def rss(self, coef: np.ndarray) -> np.ndarray:
        resid = self.X - self.X @ self.beta_matrix(coef).T
        return np.einsum("ij,ij->j", resid, resid)

    def draw_sigma2(self, coef: np.ndarray, rng) -> np.ndarray:
        rss = self.rss(coef)
        _check_rss(rss, self.col_ss)
        return 0.5 * rss / rng.gamma(0.5 * self.n, size=self.p)


@dataclass
class ChainSummary:
    """Posterior edge scores plus run metadata and optional traces."""

    edge_score: np.ndarray
    n_draws: int
    schedule: Schedule
    seed: int
    symmetric: bool
    edge_rule: str = "or"
    gamma_trace: np.ndarray | None = None
    sigma2_trace: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _reraise(exc: Exception, where: str):
    raise type(exc)("%s (%s)" % (exc, where)) from exc


def combine_directions(gamma: np.ndarray, rule: str) -> np.ndarray:
    """Symmetrize unconstrained indicator matrices (last two axes) with the or/and rule."""
    flipped = np.swapaxes(gamma, -1, -2)
    if rule == "or":
        return gamma | flipped
    if rule == "and":
        return gamma & flipped
    raise ValueError("rule must be 'or' or 'and'")


def gibbs_single(
    X,
    hyper: Hyperparams,
    schedule: Schedule | None = None,
    symmetric: bool = True,
    seed: int = 0,
    fix_sigma=None,
    edge_rule: str = "or",
    keep_traces: bool = False,
) -> ChainSummary:
    """Run the single-graph sampler on a centered ``(n, p)`` matrix.

    Parameters
    ----------
    X : array, shape (n, p)
        Centered observations.
    hyper : Hyperparams
        Output of :func:`stggm.model.resolve_hyperparams`.
    schedule : Schedule
        Total sweeps, burn-in and thinning.
    symmetric : bool
        Share one indicator per unordered pair. Otherwise each direction
        has its own indicator and edge scores use ``edge_rule``.
    seed : int
        Root seed; the run is a deterministic function of it.
    fix_sigma : array of shape (p,), optional
        Pin the residual variances instead of sampling them.

    Returns
    -------
    ChainSummary
    """
    schedule = schedule or Schedule()
    reg = NodeRegressions(X, hyper)
    p = reg.p
    rng_cell = rngmod.substream(seed, rngmod.CELL, 0)
    rng_gamma = rngmod.substream(seed, rngmod.GAMMA)
    pinned = as_sigma_array(fix_sigma, 1, p)
    sigma2 = pinned[0].copy() if pinned is not None else reg.initial_sigma2()
    gamma = np.zeros((p, p), dtype=np.int8)
    n_vars = p * (p - 1) // 2 if symmetric else p * (p - 1)
    acc = np.zeros((p, p))
    g_trace = np.zeros((schedule.n_kept, n_vars), dtype=np.uint8) if keep_traces else None
    s_trace = np.zeros((schedule.n_kept, p)) if keep_traces else None
    pairs = upper_pairs(p) if symmetric else ordered_pairs(p)
    kept = 0
    for it in range(schedule.iterations):
        try:
            coef = reg.draw_beta(gamma, sigma2, rng_cell)
            if pinned is None:
                sigma2 = reg.draw_sigma2(coef, rng_cell)
        except (CholeskyFailure, DegenerateResidual) as exc:
            _reraise(exc, "iteration %d" % it)
        beta = reg.beta_matrix(coef)
        gamma = sample_gamma_single(beta, hyper, symmetric, rng_gamma)
        if schedule.is_kept(it):
            acc += gamma if symmetric else combine_directions(gamma, edge_rule)
            if keep_traces:
                g_trace[kept] = gamma[pairs]
                s_trace[kept] = sigma2
            kept += 1
    score = acc / kept
    np.fill_diagonal(score, 0.0)
    return ChainSummary(
        edge_score=score,
        n_draws=kept,
        schedule=schedule,
        seed=seed,
        symmetric=symmetric,
        edge_rule=edge_rule,
        gamma_trace=g_trace,
        sigma2_trace=s_trace,
    )


def fit_single(X, config=None, keep_traces: bool = False) -> ChainSummary:
    """Center ``X``, resolve hyperparameters from ``config`` and run :func:`gibbs_single`."""
    from .model import Config, center_columns, resolve_hyperparams

    config = config or Config()
    X = center_columns(X)
    hyper = resolve_hyperparams(X, config)
    return gibbs_single(
        X,
        hyper,
        config.schedule,
        config.symmetric,
        config.seed,
        fix_sigma=config.fix_sigma,
        edge_rule=config.edge_rule,
        keep_traces=keep_traces,
    )
