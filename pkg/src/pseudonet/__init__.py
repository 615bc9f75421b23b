"""PseudoNet: elastic-net regularized pseudolikelihood estimation of sparse precision matrices."""
from .errors import (
    ConvergenceWarning,
    DataError,
    DegenerateAllocation,
    DegenerateRss,
    InsufficientHistory,
    LineSearchFailed,
    NotPositiveDefinite,
    NumericalError,
    PseudoNetError,
    SingularRestrictedCovariance,
    ZeroDiagonal,
    ZeroPortfolio,
    ZeroRisk,
)
from .symcore import DataMatrix, center_columns, matrix_norms, sample_covariance
from .solver import Estimate, Problem, SolverOptions, kkt_residual, objective, solve, solve_concord_baseline
from .screening import LambdaGrid, geometric_grid, lambda1_max, solve_path
from .modelselect import bic_score, kfold_cv_select, select_by_bic
from .diagestim import two_step_diagonal
from .synthlab import generate_ground_truth, sample_mvn

__version__ = "0.1.0"
