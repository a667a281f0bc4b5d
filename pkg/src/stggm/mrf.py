"""Pairwise-agreement Markov random field over the grid of one edge.

For a fixed edge the indicators ``gamma[b, t]`` over present cells have prior

.. math::

    p(\\gamma \\mid \\eta) \\propto \\exp\\Big\\{ \\eta_1 \\sum \\gamma_{bt}
        + \\eta_s \\sum_{\\text{spatial pairs}} [\\gamma = \\gamma']
        + \\eta_t \\sum_{\\text{temporal pairs}} [\\gamma = \\gamma'] \\Big\\}

Spatial pairs join distinct loci in the same period, temporal pairs join the
same locus in periods whose labels differ by one. MISSING cells carry no
state and every pair touching them is dropped.

Internally a stack of edges is held as a ``(K, E)`` 0/1 array over the ``K``
present cells and ``E`` edges, sharing one :class:`GridGeometry`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from .errors import GridTooLarge
from .model import MrfParams

#: exact normalization enumerates 2**K configurations
MAX_EXACT_CELLS = 20


def binary_configs(m: int) -> np.ndarray:
    """All ``2**m`` binary vectors as rows; the first column is the most significant bit."""
    codes = np.arange(2**m)[:, None]
    return ((codes >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)


@dataclass(frozen=True)
class GridGeometry:
    """Neighbour structure among the present cells of a grid.

    ``cells[k] = (locus_index, period_label)``; ``spatial`` and ``temporal``
    are symmetric 0/1 adjacency matrices of shape ``(K, K)``.
    """

    cells: tuple
    spatial: np.ndarray = field(repr=False)
    temporal: np.ndarray = field(repr=False)

    @classmethod
    def from_cells(cls, cells) -> "GridGeometry":
        cells = tuple((int(b), int(t)) for b, t in cells)
        K = len(cells)
        b = np.array([c[0] for c in cells]).reshape(K)
        t = np.array([c[1] for c in cells]).reshape(K)
        spatial = (b[:, None] != b[None, :]) & (t[:, None] == t[None, :])
        temporal = (b[:, None] == b[None, :]) & (np.abs(t[:, None] - t[None, :]) == 1)
        return cls(cells, spatial.astype(float), temporal.astype(float))

    @classmethod
    def from_mask(cls, mask, periods=None, order: str = "row") -> "GridGeometry":
        mask = np.asarray(mask, dtype=bool)
        B, T = mask.shape
        periods = np.arange(1, T + 1) if periods is None else np.asarray(periods)
        if order == "row":
            idx = [(b, ti) for b in range(B) for ti in range(T)]
        else:
            idx = [(b, ti) for ti in range(T) for b in range(B)]
        return cls.from_cells([(b, periods[ti]) for b, ti in idx if mask[b, ti]])

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def pairs(self, kind: str) -> np.ndarray:
        """Unordered neighbour pairs ``(k, k')`` with ``k < k'``."""
        adj = self.spatial if kind == "spatial" else self.temporal
        k1, k2 = np.nonzero(np.triu(adj, 1))
        return np.stack([k1, k2], axis=1)


@dataclass
class EdgeGammaGrid:
    """Indicator states of one edge over a ``(B, T)`` grid.

    ``mask`` marks present cells; states at absent cells are ignored.
    ``periods`` holds the integer period labels of the columns.
    """

    states: np.ndarray
    mask: np.ndarray | None = None
    periods: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states)).astype(np.int8)
        B, T = self.states.shape
        self.mask = np.ones((B, T), bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        self.periods = np.arange(1, T + 1) if self.periods is None else np.asarray(self.periods, dtype=int)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry.from_mask(self.mask, self.periods)

    def vector(self) -> np.ndarray:
        """States at present cells in row-major order."""
        return self.states[self.mask]

    def cell_index(self, b: int, t: int) -> int:
        if not self.mask[b, t]:
            raise ValueError("cell (%d, %d) is missing" % (b, t))
        return int(np.count_nonzero(self.mask.ravel()[: b * self.mask.shape[1] + t]))


# -- vectorized core ---------------------------------------------------------

def neighbor_sums(states: np.ndarray, geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Spatial and temporal sums of ``2 * gamma - 1`` over each cell's neighbours.

    ``states`` has shape ``(K, ...)``.
    """
    spins = 2.0 * np.asarray(states, dtype=float) - 1.0
    shape = spins.shape
    flat = spins.reshape(shape[0], -1)
    s = (geometry.spatial @ flat).reshape(shape)
    t = (geometry.temporal @ flat).reshape(shape)
    return s, t


def fields_from_sums(s_sum, t_sum, phi: MrfParams):
    return phi.eta1 + phi.eta_s * s_sum + phi.eta_t * t_sum


def pseudolikelihood_from_sums(states, s_sum, t_sum, phi: MrfParams) -> float:
    """Sum over cells (and edges) of the log full conditional at the observed state."""
    F = fields_from_sums(s_sum, t_sum, phi)
    g = np.asarray(states, dtype=bool)
    return float(np.sum(np.where(g, log_expit(F), log_expit(-F))))


def mrf_log_prob_table(geometry: GridGeometry, phi: MrfParams) -> tuple[np.ndarray, np.ndarray]:
    """Exact log-probabilities of all ``2**K`` configurations.

    Returns ``(configs, logp)`` with configs as rows of
    :func:`binary_configs`.
    """
    K = geometry.n_cells
    if K > MAX_EXACT_CELLS:
        raise GridTooLarge("%d present cells exceeds the enumeration guard of %d" % (K, MAX_EXACT_CELLS))
    configs = binary_configs(K)
    energy = phi.eta1 * configs.sum(axis=1).astype(float)
    for kind, eta in (("spatial", phi.eta_s), ("temporal", phi.eta_t)):
        pr = geometry.pairs(kind)
        if len(pr) and eta != 0.0:
            agree = configs[:, pr[:, 0]] == configs[:, pr[:, 1]]
            energy = energy + eta * agree.sum(axis=1)
    return configs, energy - logsumexp(energy)


# -- single-edge API ---------------------------------------------------------

def mrf_field(grid: EdgeGammaGrid, b: int, t: int, phi: MrfParams) -> float:
    """Field ``F`` at cell ``(b, t)`` (array indices); its logistic is the conditional."""
    k = grid.cell_index(b, t)
    s, tt = neighbor_sums(grid.vector(), grid.geometry)
    return float(fields_from_sums(s[k], tt[k], phi))


def mrf_conditional_prob(grid: EdgeGammaGrid, b: int, t: int, phi: MrfParams) -> float:
    """``P(gamma[b, t] = 1 | rest)``."""
    return float(expit(mrf_field(grid, b, t, phi)))


def pseudolikelihood_log(grid: EdgeGammaGrid, phi: MrfParams) -> float:
    v = grid.vector()
    s, t = neighbor_sums(v, grid.geometry)
    return pseudolikelihood_from_sums(v, s, t, phi)


def exact_mrf_log_prob(grid: EdgeGammaGrid, phi: MrfParams) -> float:
    """Exact normalized log prior of the grid's configuration (small grids only)."""
    configs, logp = mrf_log_prob_table(grid.geometry, phi)
    K = configs.shape[1]
    code = int(np.dot(grid.vector().astype(int), 1 << np.arange(K - 1, -1, -1))) if K else 0
    return float(logp[code])


# -- Metropolis-Hastings on the couplings -------------------------------------

def stack_edge_grids(grids) -> tuple[np.ndarray, GridGeometry]:
    """``(K, E)`` state array and the shared geometry of a list of edge grids."""
    grids = list(grids)
    geometry = grids[0].geometry
    for g in grids[1:]:
        if not np.array_equal(g.mask, grids[0].mask) or not np.array_equal(g.periods, grids[0].periods):
            raise ValueError("edge grids must share one mask and period labelling")
    return np.stack([g.vector() for g in grids], axis=1), geometry


def mh_step(states, geometry: GridGeometry, phi: MrfParams, rng, proposal_sd: float = 0.1, sums=None):
    """One random-walk update of ``eta_s`` then one of ``eta_t``.

    Proposals outside the uniform prior support are rejected. The target is
    the pseudolikelihood summed over every edge in ``states``. Exactly two
    normals and two uniforms are consumed per call.

    Returns
    -------
    (MrfParams, ndarray of bool)
        Updated parameters and per-coordinate acceptance flags.
    """
    s_sum, t_sum = neighbor_sums(states, geometry) if sums is None else sums
    step = rng.standard_normal(2) * proposal_sd
    log_u = np.log(rng.random(2))
    lo, hi = MrfParams.SUPPORT
    accepted = np.zeros(2, dtype=bool)
    current = pseudolikelihood_from_sums(states, s_sum, t_sum, phi)
    for c, name in enumerate(("eta_s", "eta_t")):
        value = getattr(phi, name) + step[c]
        if not lo <= value <= hi:
            continue
        cand = MrfParams(phi.eta1, value, phi.eta_t) if c == 0 else MrfParams(phi.eta1, phi.eta_s, value)
        proposed = pseudolikelihood_from_sums(states, s_sum, t_sum, cand)
        if log_u[c] < proposed - current:
            phi, current = cand, proposed
            accepted[c] = True
    return phi, accepted


def mh_update_eta(all_edge_grids, phi: MrfParams, rng, proposal_sd: float = 0.1) -> MrfParams:
    """MH update of the couplings given a collection of :class:`EdgeGammaGrid`.

    ``eta1`` is never changed.
    """
    if not phi.in_support():
        raise ValueError("couplings must start inside the prior support")
    states, geometry = stack_edge_grids(all_edge_grids)
    return mh_step(states, geometry, phi, rng, proposal_sd)[0]
