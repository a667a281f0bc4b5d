"""Joint Gibbs sampler over a locus x period grid of datasets.

Coefficients and residual variances are updated cell by cell exactly as in
the single-graph sampler. The indicators of each edge are coupled across
cells through the MRF prior in :mod:`stggm.mrf`, so every indicator is drawn
from the logistic of its coefficient log-ratio(s) plus the MRF field. The
couplings ``eta_s`` and ``eta_t`` get one Metropolis-Hastings update each per
sweep; ``eta1`` stays fixed.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import rng as rngmod
from .errors import CholeskyFailure, DegenerateResidual
from .model import (
    Cell,
    Config,
    DatasetGrid,
    MrfParams,
    Schedule,
    as_sigma_array,
    ordered_pairs,
    prepare_grid,
    resolve_grid_hyperparams,
    upper_pairs,
)
from .mrf import GridGeometry, mh_step, neighbor_sums
from .single import NodeRegressions, combine_directions, edge_log_ratios


@dataclass
class JointChainSummary:
    """Per-cell edge scores plus the coupling traces.

    ``eta_trace`` has one row ``(eta_s, eta_t)`` per sweep, burn-in included;
    ``eta_mean`` and ``eta_sd`` use the retained sweeps only.
    """

    edge_scores: dict
    eta_trace: np.ndarray
    eta_mean: np.ndarray
    eta_sd: np.ndarray
    acceptance: np.ndarray
    cells: list
    n_draws: int
    schedule: Schedule
    seed: int
    symmetric: bool
    edge_rule: str = "or"
    meta: dict = field(default_factory=dict)


def _cell_update(args):
    reg, gamma, sigma2, rng, pinned, cell = args
    try:
        coef = reg.draw_beta(gamma, sigma2, rng)
        if not pinned:
            sigma2 = reg.draw_sigma2(coef, rng)
    except (CholeskyFailure, DegenerateResidual) as exc:
        raise type(exc)("%s (locus %s, period %s)" % (exc, cell[0], cell[1])) from exc
    return coef, sigma2


def sample_gamma_joint(states, llr, geometry: GridGeometry, phi: MrfParams, u) -> np.ndarray:
    """Sequential raster update of every indicator across the grid.

    Parameters
    ----------
    states : array, shape (K, E)
        Current indicators; updated in place and returned.
    llr : array, shape (K, E)
        Coefficient log-ratios per cell and indicator variable (already
        summed over both directions in symmetric mode).
    u : array, shape (K, E)
        Uniforms; cell ``k`` uses row ``k``.

    Cells are visited in geometry order. Edges are a priori independent, so
    all edges of one cell are drawn together.
    """
    spins = 2.0 * states - 1.0
    for k in range(states.shape[0]):
        F = phi.eta1 + phi.eta_s * (geometry.spatial[k] @ spins) + phi.eta_t * (geometry.temporal[k] @ spins)
        row = u[k] < expit(llr[k] + F)
        states[k] = row
        spins[k] = 2.0 * row - 1.0
    return states


def gibbs_joint(
    grid: DatasetGrid,
    hypers: dict,
    schedule: Schedule | None = None,
    symmetric: bool = True,
    seed: int = 0,
    *,
    phi: MrfParams | None = None,
    update_eta: bool = True,
    fix_sigma=None,
    proposal_sd: float = 0.1,
    edge_rule: str = "or",
    workers: int = 1,
    order: str = "row",
) -> JointChainSummary:
    """Run the joint sampler on a prepared (validated, centered) grid.

    Parameters
    ----------
    grid : DatasetGrid
        Output of :func:`stggm.model.prepare_grid`.
    hypers : dict
        Per-cell :class:`Hyperparams`, see
        :func:`stggm.model.resolve_grid_hyperparams`.
    phi : MrfParams, optional
        Starting couplings, default ``(-0.5, 1.0, 1.0)``.
    update_eta : bool
        If False the couplings stay pinned at ``phi``.
    fix_sigma : array, optional
        Residual variances pinned per cell, shape ``(p,)`` or ``(K, p)``
        with rows in locus-major cell order.
    workers : int
        Threads for the per-cell coefficient updates. Output does not
        depend on this value.
    order : {"row", "col"}
        Raster order of the indicator sweep (locus-major or period-major).
    """
    schedule = schedule or Schedule()
    phi = phi or MrfParams()
    if not phi.in_support():
        raise ValueError("initial couplings must lie in the prior support")
    cells = grid.present_cells(order)
    # substreams follow the locus-major order, whatever the sweep order
    stream_of = {c: n for n, c in enumerate(grid.present_cells("row"))}
    K, p = len(cells), grid.p
    locus_index = {b: n for n, b in enumerate(grid.loci)}
    geometry = GridGeometry.from_cells([(locus_index[b], t) for b, t in cells])
    regs = [NodeRegressions(grid[c], hypers[c]) for c in cells]
    rngs = [rngmod.substream(seed, rngmod.CELL, stream_of[c]) for c in cells]
    rng_gamma = rngmod.substream(seed, rngmod.GAMMA)
    rng_eta = rngmod.substream(seed, rngmod.ETA)
    pinned = as_sigma_array(fix_sigma, K, p)
    sigma2 = [
        pinned[stream_of[c]].copy() if pinned is not None else regs[k].initial_sigma2()
        for k, c in enumerate(cells)
    ]

    ei, ej = upper_pairs(p) if symmetric else ordered_pairs(p)
    E = len(ei)
    states = np.zeros((K, E))
    gam = np.zeros((K, p, p), dtype=np.int8)
    acc = np.zeros((K, p, p))
    eta_trace = np.zeros((schedule.iterations, 2))
    accepted = np.zeros(2)
    kept = 0
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for it in range(schedule.iterations):
            jobs = [(regs[k], gam[k], sigma2[k], rngs[k], pinned is not None, cells[k]) for k in range(K)]
            results = list(pool.map(_cell_update, jobs)) if pool else [_cell_update(j) for j in jobs]
            llr = np.empty((K, E))
            for k, (coef, s2) in enumerate(results):
                sigma2[k] = s2
                beta = regs[k].beta_matrix(coef)
                llr[k] = edge_log_ratios(beta, hypers[cells[k]].tau1, hypers[cells[k]].tau0, symmetric)
            u = rng_gamma.random((K, E))
            sample_gamma_joint(states, llr, geometry, phi, u)
            gam[:, ei, ej] = states
            if symmetric:
                gam[:, ej, ei] = states
            if update_eta:
                phi, acc_flags = mh_step(states, geometry, phi, rng_eta, proposal_sd, neighbor_sums(states, geometry))
                accepted += acc_flags
            eta_trace[it] = phi.eta_s, phi.eta_t
            if schedule.is_kept(it):
                acc += gam if symmetric else combine_directions(gam, edge_rule)
                kept += 1
    finally:
        if pool:
            pool.shutdown()
    kept_eta = eta_trace[[it for it in range(schedule.iterations) if schedule.is_kept(it)]]
    scores = {}
    for k, c in enumerate(cells):
        s = acc[k] / kept
        np.fill_diagonal(s, 0.0)
        scores[c] = s
    return JointChainSummary(
        edge_scores=scores,
        eta_trace=eta_trace,
        eta_mean=kept_eta.mean(axis=0),
        eta_sd=kept_eta.std(axis=0, ddof=1) if kept > 1 else np.zeros(2),
        acceptance=accepted / schedule.iterations if update_eta else np.full(2, np.nan),
        cells=cells,
        n_draws=kept,
        schedule=schedule,
        seed=seed,
        symmetric=symmetric,
        edge_rule=edge_rule,
        meta={"phi_final": phi, "eta1": phi.eta1, "update_eta": update_eta},
    )


def fit_joint(grid: DatasetGrid, config: Config | None = None) -> JointChainSummary:
    """Validate and center ``grid``, resolve per-cell hyperparameters, run the joint sampler."""
    config = config or Config()
    grid = prepare_grid(grid)
    hypers = resolve_grid_hyperparams(grid, config)
    return gibbs_joint(
        grid,
        hypers,
        config.schedule,
        config.symmetric,
        config.seed,
        phi=config.mrf_init,
        update_eta=config.update_eta,
        fix_sigma=config.fix_sigma,
        proposal_sd=config.proposal_sd,
        edge_rule=config.edge_rule,
        workers=config.workers,
        order=config.sweep_order,
    )
