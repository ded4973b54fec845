"""Pseudolikelihood estimation for hypergraph Ising models with covariate fields."""

from .covariates import ProjectionMatrix, build_projection, covariance_spectrum, \
    read_covariates, write_covariates
from .diagnostics import AssumptionReport, ReductionMatrix, SelectionMap, \
    build_reduction_matrix, concavity_analysis, concavity_lower_bound, index_selection, \
    parity_check, tower_property_check, validate_assumptions, \
    verify_energy_lower_bound, verify_gradient_variance
from .errors import DimensionMismatch, GenerationFailed, HypergraphFormatError, \
    HyperisingError, IllConditioned, NoTopEdges, NonFinite, OutOfBox, TooLarge
from .experiments import ExperimentSpec, SweepResult, generate_instance, mle_oracle, \
    parse_experiment_spec, run_sweep
from .hypergraph import WeightedHypergraph, normalize_degrees, read_hypergraph, top_mass, \
    vertex_degree, write_hypergraph
from .model import ModelParameters, ParameterBox, conditional_prob, f_partial, f_value, \
    local_fields, log_partition, log_weight, read_parameters, read_sample, write_parameters, \
    write_sample
from .optimizer import EstimationReport, PgdConfig, estimate_mple, project_box
from .pseudolikelihood import lpl, lpl_evaluate, lpl_gradient, lpl_neg_hessian, sandwich_check
from .sampler import ChainConfig, sample_exact, sample_glauber

__version__ = "0.1.0"
