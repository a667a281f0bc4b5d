"""Exit criteria, one test per criterion at its stated tolerance.

Each test prints a ``[PASS]`` or ``[FAIL]`` line; the lines are repeated in
the pytest terminal summary. Run with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from _support import (
    cli_pipeline,
    complete_theta,
    report,
    single_oracle_gap,
    small_problem,
    tiny_grid,
    true_graph_mass_path,
)
from test_mrf import conditional_vs_exact_gap
from test_single import beta_moment_zscores, sigma2_mean_zscore, sigma2_median_zscore
from stggm.benchmark import time_joint, time_single, linearity_fit
from stggm.evaluate import partial_auc, pooled_roc
from stggm.joint import fit_joint, gibbs_joint
from stggm.model import Config, MrfParams, Schedule, prepare_grid, resolve_grid_hyperparams, resolve_hyperparams
from stggm.oracle import exact_joint_posterior
from stggm.simulate import SimSpec, build_experiment, edge_count, evolve_hmm, gen_precision, gen_random_graph, perturb_graph
from stggm.single import fit_single, gibbs_single

pytestmark = pytest.mark.acceptance

# the sampler mixes slowly between spike and slab at small delta; at 0.5 the
# batch-means standard error of every edge marginal after 5e4 sweeps is below
# 0.006 on these instances, so the 0.02 bound tests bias rather than noise
ORACLE_DELTA = 0.5


def test_criterion_1_single_graph_oracle():
    t0 = time.perf_counter()
    gaps = [single_oracle_gap(seed, delta=ORACLE_DELTA, sweeps=50_000) for seed in range(10)]
    secs = time.perf_counter() - t0
    ok = max(gaps) <= 0.02 and secs < 120
    report(1, "max |Gibbs - exact| over 10 seeds = %.4f (<= 0.02), %.0fs (< 120s)" % (max(gaps), secs), ok)
    assert ok


def test_criterion_2_joint_oracle():
    phi = MrfParams(-0.5, 1.0, 0.0)
    gaps = []
    for seed in range(3):
        grid, sig = tiny_grid(2, 1, p=3, seed=seed)
        g = prepare_grid(grid)
        hyp = resolve_grid_hyperparams(g, Config(delta=ORACLE_DELTA))
        exact = exact_joint_posterior(g, sig, hyp, phi).marginals()
        res = gibbs_joint(g, hyp, Schedule(51_000, 1000), seed=seed, phi=phi, update_eta=False, fix_sigma=sig)
        gaps.append(max(np.max(np.abs(res.edge_scores[c] - exact[c])) for c in g.present_cells()))
    ok = max(gaps) <= 0.02
    report(2, "2x1 grid, p=3, pinned couplings: max deviation %.4f over 3 instances (<= 0.02)" % max(gaps), ok)
    assert ok


def test_criterion_3_decoupling():
    grid, sig = tiny_grid(2, 1, p=4, seed=5)
    g = prepare_grid(grid)
    cfg = Config(delta=ORACLE_DELTA)
    hyp = resolve_grid_hyperparams(g, cfg)
    phi = MrfParams(-0.5, 0.0, 0.0)
    sched = Schedule(101_000, 1000)
    joint = gibbs_joint(g, hyp, sched, seed=1, phi=phi, update_eta=False, fix_sigma=sig)
    gaps = []
    for k, c in enumerate(g.present_cells()):
        h = resolve_hyperparams(g[c], cfg.replace(q=float(expit(phi.eta1))))
        single = gibbs_single(g[c], h, sched, seed=100 + k, fix_sigma=sig[k])
        gaps.append(np.max(np.abs(joint.edge_scores[c] - single.edge_score)))
    ok = max(gaps) <= 0.02
    report(3, "zero couplings: max |joint - single| %.4f (<= 0.02)" % max(gaps), ok)
    assert ok


def test_criterion_4_conditionals():
    t0 = time.perf_counter()
    z_mean, z_cov = beta_moment_zscores(100_000)
    beta_z = max(np.abs(z_mean).max(), np.abs(z_cov).max())
    s_mean, _ = sigma2_mean_zscore()
    s_med = sigma2_median_zscore()
    r = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        B, T = r.integers(1, 4), r.integers(1, 5)
        mask = r.random((B, T)) < 0.8
        mask.flat[r.integers(mask.size)] = True
        states = (r.random((B, T)) < 0.5).astype(int)
        phi = MrfParams(r.uniform(-2, 2), r.uniform(0, 2), r.uniform(0, 2))
        worst = max(worst, conditional_vs_exact_gap(states, mask, phi))
    secs = time.perf_counter() - t0
    ok = beta_z < 4 and abs(s_mean) < 4 and abs(s_med) < 4 and worst < 1e-10 and secs < 60
    report(
        4,
        "beta |z| %.2f, sigma2 mean z %.2f, median z %.2f (< 4 SE); MRF conditional gap %.1e (< 1e-10); %.0fs"
        % (beta_z, s_mean, s_med, worst, secs),
        ok,
    )
    assert ok


def test_criterion_5_consistency_trend():
    paths = np.array([true_graph_mass_path(complete_theta(), rep) for rep in range(50)])
    frac = float(np.mean(np.all(np.diff(paths, axis=1) > 0, axis=1)))
    ok = frac >= 0.8
    report(5, "true-graph mass increases over n=25..400 in %.0f%% of 50 replicates (>= 80%%)" % (100 * frac), ok)
    assert ok


def _joint_vs_independent(spec, iterations, burn_in):
    """Pooled partial AUCs (fp_max = number of true edges) of the joint and independent fits."""
    exp = build_experiment(spec)
    cfg = Config(iterations=iterations, burn_in=burn_in, seed=spec.seed)
    joint = fit_joint(exp.grid, cfg)
    # independent baseline: same marginal prior inclusion level as the MRF offset
    single_cfg = cfg.replace(q=float(expit(cfg.eta1)))
    cells = exp.grid.present_cells()
    indep = [fit_single(exp.grid[c], single_cfg.replace(seed=spec.seed * 1000 + k)).edge_score for k, c in enumerate(cells)]
    truth = [exp.truth[c] for c in cells]
    cj = pooled_roc([joint.edge_scores[c] for c in cells], truth)
    ci = pooled_roc(indep, truth)
    return partial_auc(cj, cj.n_pos), partial_auc(ci, ci.n_pos)


def test_criterion_6_roc_advantage():
    t0 = time.perf_counter()
    pairs = []
    for seed in range(20):
        spec = SimSpec(p=30, n=100, sparsity=0.1, change_fraction=0.2, n_periods=10, design="temporal", seed=seed)
        pairs.append(_joint_vs_independent(spec, 1500, 500))
    pairs = np.array(pairs)
    wins = int(np.sum(pairs[:, 0] > pairs[:, 1]))
    pval = stats.binomtest(wins, len(pairs), 0.5, alternative="greater").pvalue
    secs = time.perf_counter() - t0
    ok = pairs[:, 0].mean() > pairs[:, 1].mean() and pval < 0.05 and secs < 1800
    report(
        6,
        "pAUC joint %.3f vs independent %.3f, joint wins %d/20, sign test p=%.2g (< 0.05), %.0fs"
        % (pairs[:, 0].mean(), pairs[:, 1].mean(), wins, pval, secs),
        ok,
    )
    assert ok


def test_criterion_7_no_sharing_safety():
    pairs = []
    for seed in range(20):
        spec = SimSpec(p=30, n=150, sparsity=0.1, change_fraction=1.0, n_loci=3, n_periods=1, design="parallel", seed=seed)
        pairs.append(_joint_vs_independent(spec, 2000, 500))
    pairs = np.array(pairs)
    diff = pairs[:, 0].mean() - pairs[:, 1].mean()
    ok = abs(diff) <= 0.05
    report(
        7,
        "change=1: pAUC joint %.3f vs independent %.3f, difference %+.3f (|.| <= 0.05)"
        % (pairs[:, 0].mean(), pairs[:, 1].mean(), diff),
        ok,
    )
    assert ok


def test_criterion_8_generators():
    failures = []
    for seed in range(20):
        r = np.random.default_rng(seed)
        g0 = gen_random_graph(25, 0.1, r)
        m = edge_count(g0)
        chain = evolve_hmm(g0, 0.2, 10, r)
        if any(edge_count(g) != m for g in chain):
            failures.append("edge count, seed %d" % seed)
        overlaps = [int(np.triu(a & b, 1).sum()) for a, b in zip(chain, chain[1:])]
        if m != 30 or any(5 * o != 4 * m for o in overlaps):
            failures.append("overlap, seed %d" % seed)
        if edge_count(perturb_graph(g0, 1.0, r)) != m:
            failures.append("perturbation count, seed %d" % seed)
        for g in chain[:3]:
            theta = gen_precision(g, rng=r)
            off = np.abs(theta[np.triu(g, 1).astype(bool)])
            if np.linalg.eigvalsh(theta).min() < 0.5 - 1e-9 or off.min() < 0.1 or off.max() > 0.4:
                failures.append("precision, seed %d" % seed)
            if np.any(theta[np.triu(1 - g, 1).astype(bool) & ~np.eye(25, dtype=bool)] != 0):
                failures.append("support, seed %d" % seed)
    ok = not failures
    report(8, "generator invariants over 20 seeds: %s" % ("all exact" if ok else ", ".join(failures)), ok)
    assert ok


def test_criterion_9_timing():
    secs = time_single(100, 150, 1000)
    counts = (1, 2, 4, 8)
    # the graph sweep uses 100 sweeps per run: linearity in the graph count does not depend on the sweep count
    times = [time_joint(g, 100, 100, 100) for g in counts]
    fit = linearity_fit(counts, times)
    ok = secs < 300 and fit["r2"] >= 0.95
    report(
        9,
        "p=100, n=150, 1000 sweeps in %.1fs (< 300s); graph-count sweep R^2 %.3f (>= 0.95)" % (secs, fit["r2"]),
        ok,
    )
    assert ok


def test_criterion_10_determinism(tmp_path):
    runs = [cli_pipeline(tmp_path / ("run%d" % i), workers=w) for i, w in enumerate((1, 1, 4))]
    same = all(r.keys() == runs[0].keys() and all(r[k] == runs[0][k] for k in r) for r in runs[1:])
    ok = same and len(runs[0]) > 6
    report(10, "simulate/fit-joint/evaluate CSV and JSON outputs bit-identical across reruns and workers 1/1/4: %s" % same, ok)
    assert ok
