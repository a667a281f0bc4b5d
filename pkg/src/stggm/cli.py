"""Command-line entry point.

Every command writes ``run_manifest.json`` into its output directory (or
``<out>.manifest.json`` next to a single output file) holding the argv, the
effective config and its hash, the seed, input checksums, library versions and
wall-clock time.

Exit codes: 0 success, 2 usage error, 3 data or config error, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import io as sio
from .benchmark import benchmark
from .errors import DataError, GuardExceeded, InfeasiblePerturbation, NumericalError, StggmError
from .evaluate import auc, bic_select, partial_auc, pooled_roc, top_k_edges
from .joint import fit_joint
from .model import (
    Config,
    cell_label,
    center_columns,
    ordered_pairs,
    prepare_grid,
    resolve_grid_hyperparams,
    resolve_hyperparams,
    tomllib,
    upper_pairs,
)
from .oracle import exact_graph_posterior, exact_joint_posterior, unconstrained_edge_marginals
from .simulate import SimSpec, build_experiment
from .single import fit_single

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _write_manifest(target: Path, argv, config: dict | None, seed, inputs, started: float) -> None:
    record = {
        "argv": list(argv),
        "config": config,
        "config_hash": _canonical_hash(config) if config is not None else None,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs if Path(p).is_file()},
        "versions": {
            "stggm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_clock_seconds": time.perf_counter() - started,
    }
    sio.write_json(target, record)


def _manifest_for_file(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _load_config(path, seed=None, **overrides) -> Config:
    cfg = Config.load(path) if path else Config()
    changes = {k: v for k, v in overrides.items() if v is not None}
    if seed is not None:
        changes["seed"] = seed
    return cfg.replace(**changes) if changes else cfg


def _load_structured(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc
    try:
        return tomllib.loads(raw.decode()) if path.suffix.lower() == ".toml" else json.loads(raw)
    except ValueError as exc:
        raise DataError("cannot parse %s: %s" % (path, exc)) from exc


# ---------------------------------------------------------------- commands


def cmd_simulate(args, argv, started):
    data = _load_structured(args.spec)
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        spec = SimSpec(**data)
    except TypeError as exc:
        raise DataError("bad simulation spec: %s" % exc) from exc
    exp = build_experiment(spec)
    out = Path(args.out_dir)
    sio.write_grid(out, exp.grid)
    for cell, g in exp.truth.items():
        sio.write_truth(out / ("truth_%s.csv" % cell_label(cell)), g)
    sio.write_json(out / "spec.json", spec.to_dict())
    _write_manifest(out / "run_manifest.json", argv, spec.to_dict(), spec.seed, [args.spec], started)


def cmd_fit_single(args, argv, started):
    cfg = _load_config(args.config, args.seed)
    X, _ = sio.read_matrix_csv(args.data)
    summary = fit_single(X, cfg, keep_traces=bool(args.traces))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sio.write_edge_scores(out, summary.edge_score)
    if args.traces:
        tdir = Path(args.traces)
        tdir.mkdir(parents=True, exist_ok=True)
        p = X.shape[1]
        iu, ju = upper_pairs(p) if cfg.symmetric else ordered_pairs(p)
        sio.write_matrix_csv(tdir / "gamma_trace.csv", summary.gamma_trace, ["%d_%d" % e for e in zip(iu, ju)])
        sio.write_matrix_csv(tdir / "sigma2_trace.csv", summary.sigma2_trace, ["x%d" % j for j in range(p)])
    _write_manifest(_manifest_for_file(out), argv, cfg.to_dict(), cfg.seed, [args.data, args.config or ""], started)


def cmd_fit_joint(args, argv, started):
    cfg = _load_config(args.config, args.seed, workers=args.workers)
    grid = sio.read_manifest(args.manifest)
    res = fit_joint(grid, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for cell, s in res.edge_scores.items():
        sio.write_edge_scores(out / ("%s.csv" % cell_label(cell)), s)
    with (out / "eta_trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "eta_s", "eta_t"])
        for it, (a, b) in enumerate(res.eta_trace):
            w.writerow([it, repr(float(a)), repr(float(b))])
    sio.write_json(
        out / "summary.json",
        {
            "eta_s_mean": float(res.eta_mean[0]),
            "eta_t_mean": float(res.eta_mean[1]),
            "eta_s_sd": float(res.eta_sd[0]),
            "eta_t_sd": float(res.eta_sd[1]),
            "acceptance": [None if np.isnan(a) else float(a) for a in res.acceptance],
            "cells": [cell_label(c) for c in res.cells],
            "n_draws": res.n_draws,
        },
    )
    # worker count does not change results, so it is left out of the hash
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("workers")
    _write_manifest(out / "run_manifest.json", argv, cfg_dict, cfg.seed, [args.manifest, args.config or ""], started)


def _collect_pairs(scores, truth):
    """Pair score files with truth files; directories pair ``X.csv`` with ``truth_X.csv``."""
    scores, truth = Path(scores), Path(truth)
    if scores.is_dir() != truth.is_dir():
        raise UsageError("--scores and --truth must both be files or both be directories")
    if not scores.is_dir():
        return [(scores, truth)]
    pairs = []
    for f in sorted(truth.glob("truth_*.csv")):
        s = scores / f.name[len("truth_"):]
        if not s.is_file():
            raise DataError("no score file %s for %s" % (s, f))
        pairs.append((s, f))
    if not pairs:
        raise DataError("no truth_*.csv files in %s" % truth)
    return pairs


def cmd_evaluate(args, argv, started):
    pairs = _collect_pairs(args.scores, args.truth)
    S, G = [], []
    for s, t in pairs:
        m = sio.read_edge_scores(s)
        S.append(m)
        G.append(sio.read_truth(t, m.shape[0]))
    curve = pooled_roc(S, G)
    fp_max = args.fp_max if args.fp_max is not None else curve.n_pos
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "roc.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tp", "fp"])
        for thr, tp, fp in curve.points():
            w.writerow([repr(thr), tp, fp])
    sio.write_json(
        out / "metrics.json",
        {
            "auc": auc(curve),
            "partial_auc": partial_auc(curve, fp_max),
            "fp_max": fp_max,
            "n_pos": curve.n_pos,
            "n_neg": curve.n_neg,
            "n_graphs": len(pairs),
        },
    )
    _write_manifest(out / "run_manifest.json", argv, {"fp_max": fp_max}, None, [p for pr in pairs for p in pr], started)


def cmd_select(args, argv, started):
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.mode == "topk":
        if args.k is None:
            raise UsageError("--mode topk needs --k")
        scores = sio.read_edge_scores(args.scores)
        try:
            edges = top_k_edges(scores, args.k)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        sio.write_edge_list(out, edges)
        config = {"mode": "topk", "k": args.k}
    else:
        if not args.data:
            raise UsageError("--mode bic needs --data")
        X, names = sio.read_matrix_csv(args.data)
        X = center_columns(X)
        scores = sio.read_edge_scores(args.scores, X.shape[1])
        grid = None
        if args.grid:
            try:
                grid = np.array([float(v) for v in args.grid.split(",")])
            except ValueError as exc:
                raise UsageError("--grid must be comma-separated numbers") from exc
        sel = bic_select(X, scores, grid)
        iu, ju = np.nonzero(np.triu(sel.structure, 1))
        sio.write_edge_list(out, list(zip(iu.tolist(), ju.tolist())), names)
        stem = out.with_suffix("")
        sio.write_matrix_csv(Path(str(stem) + "_precision.csv"), sel.precision, names)
        sio.write_json(
            Path(str(stem) + "_bic.json"),
            {
                "threshold": sel.threshold,
                "bic": sel.bic,
                "table": [{"threshold": t, "n_edges": k, "bic": b} for t, k, b in sel.table],
                "failed": [{"threshold": t, "error": m} for t, m in sel.failed],
            },
        )
        config = {"mode": "bic", "grid": None if grid is None else grid.tolist()}
    _write_manifest(_manifest_for_file(out), argv, config, None, [args.scores, args.data or ""], started)


def cmd_oracle_check(args, argv, started):
    if bool(args.data) == bool(args.manifest):
        raise UsageError("give exactly one of --data or --manifest")
    cfg = _load_config(args.config)
    if cfg.fix_sigma is None:
        raise DataError("oracle-check needs fix_sigma in the config")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.data:
        X, _ = sio.read_matrix_csv(args.data)
        X = center_columns(X)
        hyper = resolve_hyperparams(X, cfg)
        sigma2 = np.asarray(cfg.fix_sigma, dtype=float).reshape(-1)
        if cfg.symmetric:
            exact = {None: exact_graph_posterior(X, sigma2, hyper).marginals}
        else:
            exact = {None: unconstrained_edge_marginals(X, sigma2, hyper, cfg.edge_rule)}
    else:
        grid = prepare_grid(sio.read_manifest(args.manifest))
        hypers = resolve_grid_hyperparams(grid, cfg)
        post = exact_joint_posterior(grid, cfg.fix_sigma, hypers, cfg.mrf_init, cfg.symmetric, order=cfg.sweep_order)
        exact = post.marginals()
    names = {c: ("exact.csv" if c is None else "exact_%s.csv" % cell_label(c)) for c in exact}
    for c, m in exact.items():
        sio.write_edge_scores(out / names[c], m)
    inputs = [args.data or args.manifest, args.config]
    if args.against:
        against = Path(args.against)
        devs = {}
        for c, m in exact.items():
            f = against if c is None and not against.is_dir() else against / ("%s.csv" % ("scores" if c is None else cell_label(c)))
            if not f.is_file():
                raise DataError("no chain output %s" % f)
            inputs.append(f)
            chain = sio.read_edge_scores(f, m.shape[0])
            devs["single" if c is None else cell_label(c)] = float(np.max(np.abs(chain - m)))
        sio.write_json(out / "deviation.json", {"max_abs_deviation": max(devs.values()), "per_cell": devs})
    _write_manifest(out / "run_manifest.json", argv, cfg.to_dict(), cfg.seed, inputs, started)


def cmd_benchmark(args, argv, started):
    res = benchmark(
        p_values=args.p,
        graph_counts=args.graphs or (),
        iters=args.iters,
        threads=args.threads,
        graph_iters=args.graph_iters,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "size", "threads", "seconds"])
        w.writerows(res.rows)
    sio.write_json(out / "linearity.json", res.linearity or {})
    for kind, size, threads, secs in res.rows:
        print("%-13s size=%-4d threads=%d  %.2fs" % (kind, size, threads, secs))
    if res.linearity:
        print("graphs sweep: slope %.3fs/graph, R^2 %.3f" % (res.linearity["slope"], res.linearity["r2"]))
    _write_manifest(out / "run_manifest.json", argv, vars(args) | {"func": None}, args.seed, [], started)


# ---------------------------------------------------------------- parser


def _int_list(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stggm", description="Bayesian neighbourhood selection for Gaussian graphical models.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic grid with known graphs")
    s.add_argument("--spec", required=True, help="JSON or TOML simulation spec")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit-single", help="sample one graph")
    s.add_argument("--data", required=True, help="CSV with a header row")
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="edge-score CSV")
    s.add_argument("--seed", type=int)
    s.add_argument("--traces", help="directory for gamma and sigma2 traces")
    s.set_defaults(func=cmd_fit_single)

    s = sub.add_parser("fit-joint", help="sample a grid of graphs under the MRF prior")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_fit_joint)

    s = sub.add_parser("evaluate", help="ROC and partial AUC against known graphs")
    s.add_argument("--scores", required=True, help="score file or directory")
    s.add_argument("--truth", required=True, help="truth file or directory")
    s.add_argument("--fp-max", type=float, help="partial AUC bound (default: number of true edges)")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("select", help="pick a final graph by top-K or BIC")
    s.add_argument("--data")
    s.add_argument("--scores", required=True)
    s.add_argument("--mode", choices=("topk", "bic"), required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--grid", help="comma-separated thresholds (default: observed scores)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("oracle-check", help="exact marginals for tiny problems")
    s.add_argument("--data")
    s.add_argument("--manifest")
    s.add_argument("--config", required=True, help="must set fix_sigma")
    s.add_argument("--against", help="chain output: score file or fit-joint directory")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("benchmark", help="wall-clock timing")
    s.add_argument("--p", type=_int_list, default=[100], help="comma-separated node counts")
    s.add_argument("--graphs", type=_int_list, help="comma-separated graph counts at p=100, n=100")
    s.add_argument("--iters", type=int, default=1000)
    s.add_argument("--graph-iters", type=int)
    s.add_argument("--threads", type=_int_list, default=[1])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_benchmark)
    return ap


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        args.func(args, argv, started)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InfeasiblePerturbation, GuardExceeded) as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_NUMERIC
    except StggmError as exc:
        print("%s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return EXIT_DATA
    return 0


def main() -> None:
    sys.exit(run())
