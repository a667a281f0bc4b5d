"""Synthetic graphs, precision matrices and Gaussian data.

Three experiment designs are supported:

``parallel``
    Locus 0 holds a random graph; every other locus perturbs it
    independently (one period).
``temporal``
    One locus, a graph chain where each period replaces a fixed fraction of
    the previous period's edges.
``spatiotemporal``
    A temporal chain shared by all loci, after which every cell is perturbed
    independently.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import rng as rngmod
from .errors import CholeskyFailure, ConfigError, InfeasiblePerturbation
from .model import DatasetGrid, upper_pairs

ENTRY_LOW, ENTRY_HIGH = 0.1, 0.4
DIAGONAL_MARGIN = 0.5
DESIGNS = ("parallel", "temporal", "spatiotemporal")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _from_pairs(p: int, codes) -> np.ndarray:
    iu, ju = upper_pairs(p)
    g = np.zeros((p, p), dtype=np.int8)
    g[iu[codes], ju[codes]] = 1
    return g | g.T


def edge_count(g) -> int:
    return int(np.triu(np.asarray(g), 1).sum())


def gen_random_graph(p: int, sparsity: float, rng) -> np.ndarray:
    """Uniform random graph with ``round(sparsity * p (p - 1) / 2)`` edges."""
    if not 0.0 <= sparsity <= 1.0:
        raise ConfigError("sparsity must be in [0, 1]")
    n_pairs = p * (p - 1) // 2
    m = round_half_up(sparsity * n_pairs)
    return _from_pairs(p, np.sort(rng.choice(n_pairs, size=m, replace=False)))


def perturb_graph(g, fraction: float, rng) -> np.ndarray:
    """Remove ``round(fraction * |E|)`` edges and add as many non-edges of ``g``.

    Removed edges are never re-added, and the edge count is preserved.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("fraction must be in [0, 1]")
    g = np.asarray(g)
    p = g.shape[0]
    iu, ju = upper_pairs(p)
    present = g[iu, ju].astype(bool)
    edges = np.flatnonzero(present)
    holes = np.flatnonzero(~present)
    k = round_half_up(fraction * len(edges))
    if k > len(holes):
        raise InfeasiblePerturbation(
            "cannot replace %d edges: only %d non-edges available" % (k, len(holes))
        )
    removed = rng.choice(edges, size=k, replace=False)
    added = rng.choice(holes, size=k, replace=False)
    keep = np.setdiff1d(edges, removed)
    return _from_pairs(p, np.sort(np.concatenate([keep, added])))


def evolve_hmm(g0, change: float, T: int, rng) -> list[np.ndarray]:
    """Graph chain of length ``T`` starting at ``g0``; each step perturbs the previous graph."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    chain = [np.asarray(g0, dtype=np.int8)]
    for _ in range(T - 1):
        chain.append(perturb_graph(chain[-1], change, rng))
    return chain


def gen_precision(g, entry_mode: str = "different", shared_with=None, rng=None) -> np.ndarray:
    """Diagonally dominant precision matrix supported on ``g``.

    Off-diagonal values are uniform on ``[-0.4, -0.1] U [0.1, 0.4]``. In
    ``"same"`` mode, edges also present in ``shared_with = (adjacency,
    precision)`` copy that matrix's value. Each diagonal entry is the row's
    absolute off-diagonal sum plus 0.5, so the smallest eigenvalue is at
    least 0.5.
    """
    if entry_mode not in ("different", "same"):
        raise ConfigError("entry_mode must be 'different' or 'same'")
    g = np.asarray(g)
    p = g.shape[0]
    iu, ju = upper_pairs(p)
    on = g[iu, ju].astype(bool)
    m = int(on.sum())
    values = rng.uniform(ENTRY_LOW, ENTRY_HIGH, size=m) * rng.choice([-1.0, 1.0], size=m)
    upper = np.zeros(len(iu))
    upper[on] = values
    if entry_mode == "same" and shared_with is not None:
        ref_g, ref_theta = (np.asarray(a) for a in shared_with)
        shared = on & ref_g[iu, ju].astype(bool)
        upper[shared] = ref_theta[iu[shared], ju[shared]]
    theta = np.zeros((p, p))
    theta[iu, ju] = upper
    theta = theta + theta.T
    np.fill_diagonal(theta, np.abs(theta).sum(axis=1) + DIAGONAL_MARGIN)
    return theta


def sample_mvn(precision, n: int, rng) -> np.ndarray:
    """``n`` rows from ``N(0, precision^{-1})`` via the Cholesky factor of the precision."""
    precision = np.asarray(precision, dtype=float)
    p = precision.shape[0]
    if n == 0:
        return np.zeros((0, p))
    try:
        L = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure("precision matrix is not positive definite") from exc
    z = rng.standard_normal((p, n))
    # x = L^{-T} z has covariance (L L')^{-1}
    return solve_triangular(L, z, lower=True, trans="T").T


@dataclass(frozen=True)
class SimSpec:
    """Settings of one synthetic experiment."""

    p: int = 50
    n: int = 100
    sparsity: float = 0.1
    change_fraction: float = 0.2
    perturbation_fraction: float = 0.0
    n_loci: int = 1
    n_periods: int = 10
    entry_mode: str = "different"
    design: str = "temporal"
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ConfigError("p must be >= 2")
        for name in ("sparsity", "change_fraction", "perturbation_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError("%s must be in [0, 1]" % name)
        if self.design not in DESIGNS:
            raise ConfigError("design must be one of %s" % (DESIGNS,))
        if self.entry_mode not in ("different", "same"):
            raise ConfigError("entry_mode must be 'different' or 'same'")
        if self.n_loci < 1 or self.n_periods < 1 or self.n < 0:
            raise ConfigError("n_loci and n_periods must be >= 1, n >= 0")
        if self.design == "parallel" and self.n_periods != 1:
            raise ConfigError("the parallel design has a single period")
        if self.design == "temporal" and self.n_loci != 1:
            raise ConfigError("the temporal design has a single locus")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Experiment:
    grid: DatasetGrid
    truth: dict  # cell -> adjacency
    precision: dict  # cell -> precision matrix
    spec: SimSpec


def build_experiment(spec: SimSpec) -> Experiment:
    """Generate structures, precision matrices and data for every cell."""
    rs = rngmod.substream(spec.seed, rngmod.SIM_STRUCTURE)
    loci = ["L%d" % b for b in range(spec.n_loci)]
    periods = list(range(1, spec.n_periods + 1))
    g0 = gen_random_graph(spec.p, spec.sparsity, rs)
    # parent[cell] is the graph/precision a cell shares entries with in "same" mode
    truth, parent = {}, {}
    if spec.design == "parallel":
        for b, locus in enumerate(loci):
            cell = (locus, 1)
            truth[cell] = g0 if b == 0 else perturb_graph(g0, spec.change_fraction, rs)
            parent[cell] = None if b == 0 else (loci[0], 1)
        bases = {}
    else:
        chain = evolve_hmm(g0, spec.change_fraction, spec.n_periods, rs)
        bases = {t: chain[i] for i, t in enumerate(periods)}
        for locus in loci:
            for t in periods:
                cell = (locus, t)
                if spec.design == "temporal":
                    truth[cell] = bases[t]
                    parent[cell] = None if t == periods[0] else (locus, t - 1)
                else:
                    truth[cell] = perturb_graph(bases[t], spec.perturbation_fraction, rs)
                    parent[cell] = ("base", t)
    precision = {}
    if spec.design == "spatiotemporal":
        rb = rngmod.substream(spec.seed, rngmod.SIM_CELL, 10**6)
        for i, t in enumerate(periods):
            ref = (bases[t - 1], precision[("base", t - 1)]) if i > 0 else None
            precision[("base", t)] = gen_precision(bases[t], spec.entry_mode, ref, rb)
    cells = {}
    order = [(locus, t) for locus in loci for t in periods]
    for k, cell in enumerate(order):
        rc = rngmod.substream(spec.seed, rngmod.SIM_CELL, k)
        ref_cell = parent[cell]
        ref = None
        if ref_cell is not None:
            ref_g = bases[ref_cell[1]] if ref_cell[0] == "base" else truth[ref_cell]
            ref = (ref_g, precision[ref_cell])
        precision[cell] = gen_precision(truth[cell], spec.entry_mode, ref, rc)
        cells[cell] = sample_mvn(precision[cell], spec.n, rc)
    grid = DatasetGrid(loci, periods, cells)
    return Experiment(
        grid=grid,
        truth={c: truth[c] for c in order},
        precision={c: precision[c] for c in order},
        spec=spec,
    )
