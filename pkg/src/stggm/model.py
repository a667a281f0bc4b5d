"""Domain types, grid validation, centering and hyperparameter resolution.

A single-graph problem is represented by a plain ``(n, p)`` array; a joint
problem by a :class:`DatasetGrid` whose cells are indexed by
``(locus, period)``. Everything here is pure and the containers are treated
as immutable once built.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logit

from .errors import ConfigError, GridError

try:  # pragma: no cover - version dependent
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

#: Cells with this many rows or fewer cannot support a regression fit.
MIN_ROWS = 3

Cell = tuple[str, int]


def center_columns(X) -> np.ndarray:
    """Subtract the column means of ``X``.

    Columns are not rescaled; the slab width already adapts to each column's
    standard deviation.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D observation matrix, got shape %s" % (X.shape,))
    if X.shape[0] == 0:
        return X.copy()
    return X - X.mean(axis=0, keepdims=True)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DatasetGrid:
    """Locus x period grid of observation matrices.

    Parameters
    ----------
    loci : sequence of str
        Ordered locus identifiers (categorical).
    periods : sequence of int
        Ordered integer period labels. Two periods are temporal neighbours
        when their labels differ by exactly one.
    cells : mapping
        ``(locus, period) -> (n, p) array``. Absent keys are MISSING cells.
    variables : sequence of str, optional
        Column names shared by every cell.
    """

    loci: tuple
    periods: tuple
    cells: Mapping[Cell, np.ndarray]
    variables: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "loci", tuple(str(b) for b in self.loci))
        object.__setattr__(self, "periods", tuple(int(t) for t in self.periods))
        cells = {(str(b), int(t)): _frozen(X) for (b, t), X in self.cells.items()}
        object.__setattr__(self, "cells", cells)
        if self.variables is not None:
            object.__setattr__(self, "variables", tuple(self.variables))

    @classmethod
    def single(cls, X, locus="L0", period=1, variables=None) -> "DatasetGrid":
        """Wrap one observation matrix as a degenerate 1 x 1 grid."""
        return cls((locus,), (period,), {(locus, period): X}, variables)

    @property
    def p(self) -> int:
        for X in self.cells.values():
            return X.shape[1]
        raise GridError("grid has no present cells")

    def present_cells(self, order: str = "row") -> list[Cell]:
        """Present cells in raster order.

        ``order="row"`` walks loci in the outer loop (locus-major);
        ``order="col"`` walks periods in the outer loop.
        """
        if order == "row":
            keys = [(b, t) for b in self.loci for t in self.periods]
        elif order == "col":
            keys = [(b, t) for t in self.periods for b in self.loci]
        else:
            raise ValueError("order must be 'row' or 'col'")
        return [k for k in keys if k in self.cells]

    def __contains__(self, key) -> bool:
        return key in self.cells

    def __getitem__(self, key) -> np.ndarray:
        return self.cells[key]


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_grid`.

    ``errors`` are fatal; ``excluded`` lists cells with too few rows, which
    :func:`prepare_grid` turns into MISSING cells.
    """

    errors: list[str] = field(default_factory=list)
    excluded: list[Cell] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_grid(grid: DatasetGrid) -> ValidationReport:
    """Check a grid without raising."""
    report = ValidationReport()
    periods = list(grid.periods)
    if any(b >= a for a, b in zip(periods[1:], periods[:-1])):
        report.errors.append("period labels must be strictly increasing, got %s" % periods)
    if len(set(grid.loci)) != len(grid.loci):
        report.errors.append("duplicate locus labels")
    widths = {}
    for (b, t), X in grid.cells.items():
        if b not in grid.loci or t not in grid.periods:
            report.errors.append("cell (%s, %s) is outside the declared loci/periods" % (b, t))
        if X.ndim != 2:
            report.errors.append("cell (%s, %s) is not a matrix" % (b, t))
            continue
        widths.setdefault(X.shape[1], []).append((b, t))
        if not np.all(np.isfinite(X)):
            report.errors.append("cell (%s, %s) contains non-finite values" % (b, t))
        if X.shape[0] < MIN_ROWS:
            report.excluded.append((b, t))
    if len(widths) > 1:
        detail = ", ".join("p=%d: %d cells" % (k, len(v)) for k, v in sorted(widths.items()))
        report.errors.append("column counts differ across cells (%s)" % detail)
    elif widths and min(widths) < 2:
        report.errors.append("need at least 2 variables")
    if grid.variables is not None and widths and len(grid.variables) not in widths:
        report.errors.append("variable names do not match the column count")
    if report.excluded:
        report.warnings.append(
            "%d cell(s) with n <= %d rows treated as missing: %s"
            % (len(report.excluded), MIN_ROWS - 1, report.excluded)
        )
    if not grid.cells or len(report.excluded) == len(grid.cells):
        report.errors.append("grid has no usable cells")
    return report


def prepare_grid(grid: DatasetGrid) -> DatasetGrid:
    """Validate, drop under-sized cells and center every remaining cell.

    Raises
    ------
    GridError
        If the validation report carries any error.
    """
    report = validate_grid(grid)
    if not report.ok:
        raise GridError("; ".join(report.errors))
    cells = {k: center_columns(X) for k, X in grid.cells.items() if k not in report.excluded}
    return DatasetGrid(grid.loci, grid.periods, cells, grid.variables)


@dataclass(frozen=True)
class Schedule:
    """MCMC run length. ``iterations`` counts every sweep, burn-in included."""

    iterations: int = 5000
    burn_in: int = 2000
    thin: int = 1

    def __post_init__(self):
        if self.iterations <= self.burn_in or self.burn_in < 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")

    def is_kept(self, it: int) -> bool:
        return it >= self.burn_in and (it - self.burn_in) % self.thin == 0

    @property
    def n_kept(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass(frozen=True)
class MrfParams:
    """Sparsity offset and the spatial / temporal couplings."""

    eta1: float = -0.5
    eta_s: float = 1.0
    eta_t: float = 1.0

    #: uniform prior support of both couplings
    SUPPORT = (0.0, 2.0)

    def in_support(self) -> bool:
        lo, hi = self.SUPPORT
        return lo <= self.eta_s <= hi and lo <= self.eta_t <= hi


@dataclass(frozen=True)
class Hyperparams:
    """Resolved spike-and-slab hyperparameters for one observation matrix.

    ``tau1[i] = l * s_i`` and ``tau0 = delta * tau1``; ``nu`` is fixed at 0
    (flat prior on the residual variances) so ``lam`` is never used.
    """

    q: float
    delta: float
    l: float
    tau1: np.ndarray
    tau0: np.ndarray
    eta1: float = -0.5
    nu: float = 0.0
    lam: float | None = None

    @property
    def p(self) -> int:
        return len(self.tau1)

    @property
    def prior_log_odds(self) -> float:
        return float(logit(self.q))


@dataclass
class Config:
    """User-facing settings, loadable from JSON or TOML.

    ``l=None`` selects the automatic slab scale (0.1, or 0.1 n/p when n < p).
    """

    q: float = 0.1
    delta: float = 0.1
    l: float | None = None
    eta1: float = -0.5
    eta_s: float = 1.0
    eta_t: float = 1.0
    iterations: int = 5000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    symmetric: bool = True
    fix_sigma: list | None = None
    update_eta: bool = True
    proposal_sd: float = 0.1
    edge_rule: str = "or"
    workers: int = 1
    sweep_order: str = "row"

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ConfigError("q must lie in (0, 1), got %r" % self.q)
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1), got %r" % self.delta)
        if self.l is not None and not self.l > 0:
            raise ConfigError("l must be positive, got %r" % self.l)
        if self.edge_rule not in ("or", "and"):
            raise ConfigError("edge_rule must be 'or' or 'and'")
        if self.proposal_sd <= 0:
            raise ConfigError("proposal_sd must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.schedule  # validates run length

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.iterations, self.burn_in, self.thin)

    @property
    def mrf_init(self) -> MrfParams:
        return MrfParams(self.eta1, self.eta_s, self.eta_t)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "Config":
        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError("unknown config keys: %s" % sorted(unknown))
        return cls(**dict(data))

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            text = path.read_bytes()
        except OSError as exc:
            raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text.decode())
        else:
            data = json.loads(text)
        return cls.from_mapping(data)


def slab_scale(n: int, p: int, l: float | None = None) -> float:
    """Slab multiplier: 0.1, shrunk to 0.1 n/p when there are fewer rows than variables."""
    if l is not None:
        return float(l)
    return 0.1 * n / p if n < p else 0.1


def resolve_hyperparams(X, config: Config | None = None) -> Hyperparams:
    """Resolve hyperparameters for one observation matrix.

    Column standard deviations use the unbiased ``n - 1`` denominator.

    Raises
    ------
    ConfigError
        On a constant column (zero slab width) or fewer than two rows.
    """
    config = config or Config()
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2:
        raise ConfigError("need at least 2 rows to estimate column scales")
    s = X.std(axis=0, ddof=1)
    if np.any(~(s > 0)):
        bad = np.flatnonzero(~(s > 0)).tolist()
        raise ConfigError("constant column(s) %s give a zero slab width" % bad)
    l = slab_scale(n, p, config.l)
    tau1 = _frozen(l * s)
    tau0 = _frozen(config.delta * tau1)
    return Hyperparams(q=config.q, delta=config.delta, l=l, tau1=tau1, tau0=tau0, eta1=config.eta1)


def resolve_grid_hyperparams(grid: DatasetGrid, config: Config | None = None) -> dict[Cell, Hyperparams]:
    """Per-cell hyperparameters; each cell uses its own row count and scales."""
    return {k: resolve_hyperparams(X, config) for k, X in grid.cells.items()}


def as_sigma_array(fix_sigma, n_cells: int, p: int) -> np.ndarray | None:
    """Broadcast a pinned residual-variance spec to shape ``(n_cells, p)``."""
    if fix_sigma is None:
        return None
    a = np.asarray(fix_sigma, dtype=float)
    if a.shape == (p,):
        a = np.broadcast_to(a, (n_cells, p))
    if a.shape != (n_cells, p):
        raise ConfigError("fix_sigma must have shape (%d,) or (%d, %d), got %s" % (p, n_cells, p, a.shape))
    if np.any(~(a > 0)):
        raise ConfigError("fix_sigma entries must be positive")
    return np.array(a)


def upper_pairs(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major upper-triangle index pairs ``(i, j)`` with ``i < j``."""
    return np.triu_indices(p, k=1)


def ordered_pairs(p: int) -> tuple[np.ndarray, np.ndarray]:
    """All off-diagonal ordered pairs in row-major order."""
    i, j = np.nonzero(~np.eye(p, dtype=bool))
    return i, j


def cell_label(cell: Cell) -> str:
    return "%s_%s" % cell


def check_square(a: Sequence, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("%s must be square, got shape %s" % (name, a.shape))
    return a
