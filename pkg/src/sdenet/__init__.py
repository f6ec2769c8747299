"""Bayesian inference of sparse stochastic dynamical networks.

Reconstructs directed network topology from low-rate, noisy time series
by Gibbs-sampling link indicators, kernel hyperparameters, impulse
responses, and refined latent trajectories of a linear SDE model.
"""

from .benchmark import SUITES, run_suite
from .dataio import TimeSeriesData, load_dataset, save_dataset
from .dsf import (
    RegressionData,
    antialias_filter,
    build_regression,
    default_lag_count,
    dsf_transfer_eval,
    ground_truth_topology,
    io_transfer_eval,
    recover_dsf_from_io,
)
from .errors import ConfigError, DataError, GridError, NumericError, SdenetError
from .grid import FineGrid, build_grid
from .kernels import KernelSpec, LinkPrior, build_link_covariance, kernel_eval
from .metrics import binary_metrics, ranked_metrics, topology_from_probability
from .posterior import (
    ModelConfig,
    log_collapsed_marginal,
    log_prior_hyper,
    node_evidence,
    sample_lambda_conditional,
    sample_sigma_conditional,
    sample_w_conditional,
)
from .results import PosteriorSummary, impulse_score, pool_chains, summarize
from .sampler import Chain, ChainSamples, ChainState, SamplerConfig, run_chain
from .simulator import (
    SimulationOutput,
    SystemMatrices,
    generate_random_network,
    generate_ring_network,
    integrate_sde_path,
    is_hurwitz,
    simulate_equivalent_realization,
    simulate_sde,
)
from .sparse_approx import PseudoGrid, build_projection, make_pseudo_grid

__version__ = "0.1.0"

__all__ = [
    "SUITES",
    "run_suite",
    "TimeSeriesData",
    "load_dataset",
    "save_dataset",
    "RegressionData",
    "antialias_filter",
    "build_regression",
    "default_lag_count",
    "dsf_transfer_eval",
    "ground_truth_topology",
    "io_transfer_eval",
    "recover_dsf_from_io",
    "ConfigError",
    "DataError",
    "GridError",
    "NumericError",
    "SdenetError",
    "FineGrid",
    "build_grid",
    "KernelSpec",
    "LinkPrior",
    "build_link_covariance",
    "kernel_eval",
    "binary_metrics",
    "ranked_metrics",
    "topology_from_probability",
    "ModelConfig",
    "log_collapsed_marginal",
    "log_prior_hyper",
    "node_evidence",
    "sample_lambda_conditional",
    "sample_sigma_conditional",
    "sample_w_conditional",
    "PosteriorSummary",
    "impulse_score",
    "pool_chains",
    "summarize",
    "Chain",
    "ChainSamples",
    "ChainState",
    "SamplerConfig",
    "run_chain",
    "SimulationOutput",
    "SystemMatrices",
    "generate_random_network",
    "generate_ring_network",
    "integrate_sde_path",
    "is_hurwitz",
    "simulate_equivalent_realization",
    "simulate_sde",
    "PseudoGrid",
    "build_projection",
    "make_pseudo_grid",
    "__version__",
]
