"""Low-rank plus diagonal precision matrix estimation.

Thin wrapper over the compiled extension; every function takes and returns
float64 numpy arrays.
"""

from ._core import (
    DegenerateReturns,
    Error,
    InfeasibleConstraints,
    InvalidInput,
    NotPositiveDefinite,
    ParseError,
    SingularSampleCovariance,
    center_columns,
    chol_pd,
    fit_fixed_rank,
    fit_rank_penalized,
    inv_pd,
    kl_loss,
    logdet_pd,
    make_sigma,
    markowitz_weights,
    objective,
    precision_parts,
    rank_penalty,
    read_returns_panel,
    rolling_backtest,
    run_simulation,
    sample_covariance,
    sample_mvn,
    sharpe_ratio,
    sym_eig,
    update_L,
)

__version__ = "0.1.0"
