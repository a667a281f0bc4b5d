"""Shared builders for the test modules."""
import numpy as np

from stggm import rng as rngmod
from stggm.model import Config, DatasetGrid, MrfParams, Schedule, center_columns, resolve_hyperparams
from stggm.oracle import exact_graph_posterior
from stggm.simulate import gen_precision, gen_random_graph, sample_mvn
from stggm.single import gibbs_single


def small_problem(p=4, n=30, seed=0, sparsity=0.5):
    """Centered data from a random sparse precision matrix, plus the truth."""
    r = rngmod.substream(seed, 77)
    g = gen_random_graph(p, sparsity, r)
    theta = gen_precision(g, rng=r)
    X = center_columns(sample_mvn(theta, n, r))
    # residual variance of node i given the rest is 1 / theta_ii
    return X, g, theta, 1.0 / np.diag(theta)


def single_oracle_gap(seed, delta=0.3, sweeps=50_000, burn_in=1000, p=4, n=30):
    """Max |Gibbs - exact| edge marginal gap on a seeded p=4 problem with pinned sigma2."""
    X, _, _, sig = small_problem(p, n, seed)
    hyper = resolve_hyperparams(X, Config(delta=delta))
    exact = exact_graph_posterior(X, sig, hyper).marginals
    chain = gibbs_single(X, hyper, Schedule(sweeps + burn_in, burn_in), seed=seed, fix_sigma=sig)
    return float(np.max(np.abs(chain.edge_score - exact)))


def tiny_grid(n_loci=2, n_periods=1, p=3, n=30, seed=0, missing=()):
    """Grid of independent small datasets and the true residual variances.

    Variances come back as a ``(K, p)`` array in locus-major cell order.
    """
    cells, sig = {}, []
    loci = ["L%d" % b for b in range(n_loci)]
    for k, (b, t) in enumerate((b, t) for b in loci for t in range(1, n_periods + 1)):
        if (b, t) in missing:
            continue
        X, _, _, s = small_problem(p, n, seed * 100 + k, sparsity=0.6)
        cells[(b, t)] = X
        sig.append(s)
    return DatasetGrid(loci, list(range(1, n_periods + 1)), cells), np.array(sig)


PINNED = MrfParams(-0.5, 1.0, 0.0)

# filled by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(number, text, ok):
    line = "[%s] criterion %d: %s" % ("PASS" if ok else "FAIL", number, text)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def true_graph_mass_path(theta, rep, ns=(25, 50, 100, 200, 400), config=None):
    """Exact posterior mass on the true graph along nested sample sizes.

    One replicate draws ``max(ns)`` rows and uses the leading ``n`` rows at
    each size, so the sequence tracks a single growing dataset.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    truth = (theta != 0).astype(int) - np.eye(p, dtype=int)
    sig = 1.0 / np.diag(theta)
    rows = sample_mvn(theta, max(ns), rngmod.substream(rep, 5))
    out = []
    for n in ns:
        X = center_columns(rows[:n])
        hyper = resolve_hyperparams(X, config or Config())
        out.append(exact_graph_posterior(X, sig, hyper).prob_of(truth))
    return np.array(out)


def complete_theta(p=4, off=0.25):
    theta = np.full((p, p), off)
    np.fill_diagonal(theta, 1.0)
    return theta


def cli_pipeline(root, workers, seed=7):
    """simulate -> fit-joint -> evaluate through the command line.

    Returns ``{relative path: bytes}`` for every CSV and metrics file written.
    """
    import json
    from pathlib import Path

    from stggm.cli import run

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    spec = root / "spec.json"
    spec.write_text(json.dumps({"p": 8, "n": 40, "sparsity": 0.2, "n_loci": 1, "n_periods": 3, "design": "temporal"}))
    cfg = root / "config.toml"
    cfg.write_text("iterations = 300\nburn_in = 100\nproposal_sd = 0.3\n")
    steps = [
        ["simulate", "--spec", str(spec), "--out-dir", str(root / "sim"), "--seed", str(seed)],
        ["fit-joint", "--manifest", str(root / "sim" / "manifest.json"), "--config", str(cfg),
         "--out-dir", str(root / "fit"), "--seed", str(seed), "--workers", str(workers)],
        ["evaluate", "--scores", str(root / "fit"), "--truth", str(root / "sim"), "--out-dir", str(root / "eval")],
    ]
    for argv in steps:
        code = run(argv)
        if code != 0:
            raise RuntimeError("%s exited with %d" % (argv[0], code))
    files = sorted(root.glob("*/*.csv")) + [root / "eval" / "metrics.json", root / "fit" / "summary.json"]
    return {str(f.relative_to(root)): f.read_bytes() for f in files}
