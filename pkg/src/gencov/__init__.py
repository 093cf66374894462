"""Generalized covariance matrices and graph selection for discrete Markov random fields."""
from . import exceptions
from .estimation import (
    GraphicalLassoSelector,
    MissingDataCovariance,
    NodewiseSelector,
    combine_neighborhoods,
    corrected_covariance_missing,
    graphical_lasso_solve,
    modified_lasso_solve,
    select_corr_decay,
    select_glasso,
    select_nodewise_general,
    select_nodewise_tree,
)
from .graph import (
    Graph,
    GraphFamilySpec,
    JunctionTree,
    build_junction_tree,
    dino_graph,
    generate_graph,
    triangulate,
)
from .mrf import DiscreteMRF, StatisticBasis, exact_distribution, indicator_vector, ising_model, random_model
from .population import (
    entropy_decomposition_check,
    generalized_covariance,
    incoherence_alpha,
    inverse_and_blocks,
    verify_neighborhood_corollary,
    verify_separator_corollary,
    verify_theorem1,
)
from .sampling import Dataset, SamplerConfig, corrupt_missing, exact_sample, gibbs_sample, sample

__version__ = "0.1.0"

__all__ = [
    "exceptions",
    "GraphicalLassoSelector", "MissingDataCovariance", "NodewiseSelector", "combine_neighborhoods",
    "corrected_covariance_missing", "graphical_lasso_solve", "modified_lasso_solve", "select_corr_decay",
    "select_glasso", "select_nodewise_general", "select_nodewise_tree",
    "Graph", "GraphFamilySpec", "JunctionTree", "build_junction_tree", "dino_graph", "generate_graph",
    "triangulate",
    "DiscreteMRF", "StatisticBasis", "exact_distribution", "indicator_vector", "ising_model", "random_model",
    "entropy_decomposition_check", "generalized_covariance", "incoherence_alpha", "inverse_and_blocks",
    "verify_neighborhood_corollary", "verify_separator_corollary", "verify_theorem1",
    "Dataset", "SamplerConfig", "corrupt_missing", "exact_sample", "gibbs_sample", "sample",
]
