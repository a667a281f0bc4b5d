"""Bayesian neighbourhood selection for Gaussian graphical models on spatio-temporal grids."""
__version__ = "0.1.0"

from .errors import (
    CholeskyFailure,
    ConfigError,
    DataError,
    DegenerateResidual,
    GridError,
    GridTooLarge,
    GuardExceeded,
    InfeasiblePerturbation,
    NonConvergence,
    NumericalError,
    SingularCovariance,
    StggmError,
)
from .evaluate import auc, bic_select, partial_auc, pooled_roc, roc_curve, top_k_edges
from .joint import JointChainSummary, fit_joint, gibbs_joint
from .model import (
    Config,
    DatasetGrid,
    Hyperparams,
    MrfParams,
    Schedule,
    center_columns,
    prepare_grid,
    resolve_grid_hyperparams,
    resolve_hyperparams,
    validate_grid,
)
from .oracle import exact_graph_posterior, exact_joint_posterior, exact_node_posterior
from .simulate import SimSpec, build_experiment
from .single import ChainSummary, fit_single, gibbs_single
