"""Wall-clock timing of the samplers."""
from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import rng as rngmod
from .joint import gibbs_joint
from .model import Config, DatasetGrid, MrfParams, Schedule, center_columns, prepare_grid, resolve_grid_hyperparams, resolve_hyperparams
from .simulate import gen_precision, gen_random_graph, sample_mvn
from .single import gibbs_single


@dataclass
class BenchmarkResult:
    rows: list  # (kind, size, threads, seconds)
    linearity: dict | None  # slope, intercept, r2 over the graph-count sweep


def _dataset(p: int, n: int, rng) -> np.ndarray:
    g = gen_random_graph(p, 0.1, rng)
    return center_columns(sample_mvn(gen_precision(g, rng=rng), n, rng))


def time_single(p: int, n: int, iters: int, seed: int = 0) -> float:
    rng = rngmod.substream(seed, rngmod.BENCH, p)
    X = _dataset(p, n, rng)
    hyper = resolve_hyperparams(X, Config())
    t0 = time.perf_counter()
    gibbs_single(X, hyper, Schedule(iters, 0), seed=seed)
    return time.perf_counter() - t0


def time_joint(n_graphs: int, p: int, n: int, iters: int, threads: int = 1, seed: int = 0) -> float:
    rng = rngmod.substream(seed, rngmod.BENCH, 1000 + n_graphs)
    loci = ["L%d" % b for b in range(n_graphs)]
    grid = prepare_grid(DatasetGrid(loci, [1], {(b, 1): _dataset(p, n, rng) for b in loci}))
    hypers = resolve_grid_hyperparams(grid, Config())
    t0 = time.perf_counter()
    gibbs_joint(grid, hypers, Schedule(iters, 0), seed=seed, phi=MrfParams(), workers=threads)
    return time.perf_counter() - t0


def linearity_fit(sizes, seconds) -> dict:
    fit = stats.linregress(np.asarray(sizes, float), np.asarray(seconds, float))
    return {"slope": float(fit.slope), "intercept": float(fit.intercept), "r2": float(fit.rvalue**2)}


def benchmark(
    p_values=(50, 100, 200),
    graph_counts=(1, 2, 4, 8),
    iters: int = 1000,
    threads=(1,),
    n_single: int = 150,
    p_graphs: int = 100,
    n_graphs: int = 100,
    graph_iters: int | None = None,
    seed: int = 0,
) -> BenchmarkResult:
    """Time single-graph runs over ``p_values`` and joint runs over ``graph_counts``.

    The graph-count sweep runs with the first entry of ``threads``; each
    further thread count re-times the largest graph count.
    """
    rows = []
    for p in p_values:
        rows.append(("single_p", int(p), 1, time_single(p, n_single, iters, seed)))
    gi = graph_iters or iters
    linearity = None
    if graph_counts:
        t = threads[0]
        secs = [time_joint(g, p_graphs, n_graphs, gi, t, seed) for g in graph_counts]
        rows += [("joint_graphs", int(g), int(t), s) for g, s in zip(graph_counts, secs)]
        if len(graph_counts) > 1:
            linearity = linearity_fit(graph_counts, secs)
        for t in threads[1:]:
            g = max(graph_counts)
            rows.append(("joint_graphs", int(g), int(t), time_joint(g, p_graphs, n_graphs, gi, t, seed)))
    return BenchmarkResult(rows, linearity)


def available_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
