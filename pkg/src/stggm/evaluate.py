"""ROC evaluation against known graphs, top-K selection and BIC refits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, NumericalError, SingularCovariance
from .model import check_square, upper_pairs


@dataclass
class RocCurve:
    """Cumulative true/false positive counts, one point per distinct score.

    Points run from the highest threshold to the lowest; an edge is called
    when its score is ``>= threshold``.
    """

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    def points(self):
        return list(zip(self.thresholds.tolist(), self.tp.tolist(), self.fp.tolist()))

    def selected(self) -> np.ndarray:
        """Total number of called edges at each point (an alternative x axis for ROC plots)."""
        return self.tp + self.fp


def roc_from_vectors(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each tied block
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True]) if len(s) else np.array([], int)
    return RocCurve(s[last], tp[last], fp[last], int(labels.sum()), int((~labels).sum()))


def _upper(a):
    a = check_square(a)
    iu, ju = upper_pairs(a.shape[0])
    return a[iu, ju]


def roc_curve(scores, truth) -> RocCurve:
    """ROC over the unordered pairs of one graph."""
    return roc_from_vectors(_upper(scores), _upper(truth) != 0)


def pooled_roc(score_mats, truth_mats) -> RocCurve:
    """ROC with the pairs of several graphs pooled into one ranking."""
    s = np.concatenate([_upper(m) for m in score_mats])
    y = np.concatenate([_upper(t) != 0 for t in truth_mats])
    return roc_from_vectors(s, y)


def partial_auc(curve: RocCurve, fp_max: float) -> float:
    """Normalized trapezoidal area under TP-vs-FP on ``[0, fp_max]``.

    The curve starts at the origin and is held flat past its last point.
    The result is divided by ``n_pos * fp_max`` so a perfect ranking scores 1.
    """
    if not fp_max > 0:
        raise ValueError("fp_max must be positive")
    if curve.n_pos == 0:
        return float("nan")
    x = np.r_[0.0, curve.fp.astype(float)]
    y = np.r_[0.0, curve.tp.astype(float)]
    k = np.searchsorted(x, fp_max, side="right")
    if k == len(x):
        y_end = y[-1]
    else:
        y_end = y[k - 1] + (y[k] - y[k - 1]) * (fp_max - x[k - 1]) / (x[k] - x[k - 1])
    xs = np.r_[x[:k], fp_max]
    ys = np.r_[y[:k], y_end]
    area = np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))
    return float(area / (curve.n_pos * fp_max))


def auc(curve: RocCurve) -> float:
    """Standard ROC AUC (ties count one half)."""
    if curve.n_neg == 0 or curve.n_pos == 0:
        return float("nan")
    return partial_auc(curve, curve.n_neg)


def top_k_edges(scores, K: int) -> list[tuple[int, int]]:
    """The ``K`` highest-scoring unordered pairs.

    Ties are broken by ``(i, j)`` in lexicographic order.
    """
    scores = check_square(scores)
    iu, ju = upper_pairs(scores.shape[0])
    if not 0 <= K <= len(iu):
        raise ValueError("K must be between 0 and %d" % len(iu))
    s = scores[iu, ju]
    order = np.lexsort((ju, iu, -s))[:K]
    return [(int(iu[k]), int(ju[k])) for k in order]


def edges_to_adjacency(edges, p: int) -> np.ndarray:
    g = np.zeros((p, p), dtype=np.int8)
    for i, j in edges:
        g[i, j] = g[j, i] = 1
    return g


def fit_precision_given_structure(S, structure, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Gaussian MLE of the precision matrix with zeros off ``structure``.

    Iterative neighbourhood regressions on the working covariance ``W``
    (the classical algorithm for graphs with known zeros). Each column
    update puts ``S`` back on that column's support, so convergence is
    declared when a full sweep changes ``W`` by at most ``tol`` in
    max-norm. The returned matrix is exactly zero off the support.

    Raises
    ------
    SingularCovariance
        A diagonal entry of ``S`` is not positive or a sub-system is singular.
    NonConvergence
        ``max_iter`` sweeps without meeting ``tol``.
    """
    S = np.asarray(check_square(S, "S"), dtype=float)
    G = np.asarray(check_square(structure, "structure")) != 0
    p = S.shape[0]
    if np.any(~(np.diag(S) > 0)):
        raise SingularCovariance("sample covariance has a non-positive diagonal")
    G = (G | G.T) & ~np.eye(p, dtype=bool)
    W = S.copy()
    betas = np.zeros((p, p))
    for _ in range(max_iter):
        W_prev = W.copy()
        for j in range(p):
            nb = np.flatnonzero(G[j])
            b = np.zeros(p)
            if len(nb):
                try:
                    b[nb] = np.linalg.solve(W[np.ix_(nb, nb)], S[nb, j])
                except np.linalg.LinAlgError as exc:
                    raise SingularCovariance("singular sub-covariance for node %d" % j) from exc
            w = W @ b
            w[j] = S[j, j]
            W[:, j] = w
            W[j, :] = w
            betas[j] = b
        gap = np.max(np.abs(W - W_prev))
        if gap <= tol:
            break
    else:
        raise NonConvergence("no convergence after %d sweeps (gap %.3g)" % (max_iter, gap))
    theta = np.zeros((p, p))
    for j in range(p):
        b = betas[j]
        denom = S[j, j] - W[j] @ b
        if not denom > 0:
            raise SingularCovariance("non-positive conditional variance for node %d" % j)
        theta[:, j] = np.where(G[:, j], -b / denom, 0.0)
        theta[j, j] = 1.0 / denom
    theta = 0.5 * (theta + theta.T)
    theta[~(G | np.eye(p, dtype=bool))] = 0.0
    return theta


def gaussian_loglik(X, theta) -> float:
    """Log-likelihood of centered rows ``X`` under ``N(0, theta^{-1})``."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        raise NumericalError("precision estimate is not positive definite")
    S = X.T @ X / n
    return float(0.5 * n * (logdet - np.sum(S * theta) - p * np.log(2.0 * np.pi)))


def default_threshold_grid(scores, max_points: int = 200) -> np.ndarray:
    """Distinct observed scores, evenly subsampled to at most ``max_points``."""
    u = np.unique(_upper(scores))[::-1]
    if len(u) > max_points:
        u = u[np.unique(np.linspace(0, len(u) - 1, max_points).round().astype(int))]
    return u


@dataclass
class BicSelection:
    threshold: float
    structure: np.ndarray
    precision: np.ndarray
    bic: float
    table: list = field(default_factory=list)  # (threshold, n_edges, bic)
    failed: list = field(default_factory=list)  # (threshold, message)


def bic_select(X, scores, threshold_grid=None, tol: float = 1e-8, max_iter: int = 1000) -> BicSelection:
    """Threshold the scores, refit the precision on each support, keep the lowest BIC.

    ``BIC = -2 loglik + log(n) (#edges + p)``. Ties go to the sparser model.
    Thresholds whose refit fails are skipped and reported in ``failed``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    scores = check_square(scores)
    grid = default_threshold_grid(scores) if threshold_grid is None else np.atleast_1d(threshold_grid)
    if len(grid) == 0:
        raise ValueError("threshold grid is empty")
    S = X.T @ X / n
    best, table, failed = None, [], []
    for thr in grid:
        structure = (scores >= thr).astype(np.int8)
        structure = structure | structure.T
        np.fill_diagonal(structure, 0)
        try:
            theta = fit_precision_given_structure(S, structure, tol, max_iter)
            bic = -2.0 * gaussian_loglik(X, theta) + np.log(n) * (structure.sum() // 2 + p)
        except NumericalError as exc:
            failed.append((float(thr), str(exc)))
            continue
        k = int(structure.sum() // 2)
        table.append((float(thr), k, float(bic)))
        key = (bic, k)
        if best is None or key < best[0]:
            best = (key, float(thr), structure, theta, float(bic))
    if best is None:
        raise NumericalError("every threshold failed to refit: %s" % failed)
    return BicSelection(best[1], best[2], best[3], best[4], table, failed)
