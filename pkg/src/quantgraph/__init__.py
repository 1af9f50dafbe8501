"""Robust sparse graphical models via Bayesian multi-quantile neighborhood selection."""

from .ald import (LAMBDA_FLOOR, MixtureConstants, TiltedIGParams, ald_cdf,
                  ald_log_density, check_loss, inverse_gaussian_log_density,
                  mixture_constants, sample_ald, sample_inverse_gaussian,
                  sample_tilted_ig, tilted_ig_moments)
from .data import (Dataset, McmcState, NeighborhoodPosterior, NodeProblem,
                   PriorConfig, QuantileGrid, VariationalState,
                   build_node_problem, init_mcmc_state, init_vb_state,
                   standardize)
from .graph import (FitReport, Graph, NodeFitError, assemble_graph,
                    edge_signs, fit_all_nodes)
from .mcmc import McmcConfig, run_chain
from .simulate import (Metrics, SimOutput, evaluate, gen_example1,
                       gen_example2, residual_diagnostic)
from .vb import VbConfig, run_vb

__version__ = "0.1.0"

__all__ = [
    "LAMBDA_FLOOR", "MixtureConstants", "TiltedIGParams", "ald_cdf",
    "ald_log_density", "check_loss", "inverse_gaussian_log_density",
    "mixture_constants", "sample_ald", "sample_inverse_gaussian",
    "sample_tilted_ig", "tilted_ig_moments",
    "Dataset", "McmcState", "NeighborhoodPosterior", "NodeProblem",
    "PriorConfig", "QuantileGrid", "VariationalState", "build_node_problem",
    "init_mcmc_state", "init_vb_state", "standardize",
    "FitReport", "Graph", "NodeFitError", "assemble_graph", "edge_signs",
    "fit_all_nodes",
    "McmcConfig", "run_chain",
    "Metrics", "SimOutput", "evaluate", "gen_example1", "gen_example2",
    "residual_diagnostic",
    "VbConfig", "run_vb",
    "__version__",
]
