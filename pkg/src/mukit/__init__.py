"""Exact and approximate computation of the logistic-regression complexity
measure mu_y(X), plus executable checks of the hardness constructions."""

from mukit.core import (
    SignedData,
    SplitMasses,
    logistic_loss,
    mu_ratio,
    relu_loss,
    split_masses,
    standardize,
)
from mukit.datagen import CsvSchema, SyntheticSpec, balanced_subsample, gen_synthetic, load_csv, write_csv
from mukit.experiment import ExperimentConfig, ResultRow, run_experiment
from mukit.lowrank import LowRankApprox, additive_bound, loss_gap, truncated_svd
from mukit.lp_solver import (
    IterationLimitError,
    LpError,
    LpProblem,
    LpSolution,
    MilpProblem,
    NodeLimitError,
    solve_lp,
    solve_milp,
)
from mukit.mu_exact import MuResult, compute_mu_exact
from mukit.mu_oracle import mu_bruteforce
from mukit.mu_sketch import MuBounds, SketchConfig, approx_mu_bounds, solve_min_neg_mass

__all__ = [
    "CsvSchema",
    "ExperimentConfig",
    "IterationLimitError",
    "LowRankApprox",
    "LpError",
    "LpProblem",
    "LpSolution",
    "MilpProblem",
    "MuBounds",
    "MuResult",
    "NodeLimitError",
    "ResultRow",
    "SignedData",
    "SketchConfig",
    "SplitMasses",
    "SyntheticSpec",
    "additive_bound",
    "approx_mu_bounds",
    "balanced_subsample",
    "compute_mu_exact",
    "gen_synthetic",
    "load_csv",
    "logistic_loss",
    "loss_gap",
    "mu_bruteforce",
    "mu_ratio",
    "relu_loss",
    "run_experiment",
    "solve_lp",
    "solve_milp",
    "solve_min_neg_mass",
    "split_masses",
    "standardize",
    "truncated_svd",
    "write_csv",
]

__version__ = "0.1.0"
