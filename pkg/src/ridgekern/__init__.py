"""Ridge-kernel averaging, conic kernel synthesis and random-kernel networks."""
from ._backend import BACKEND
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, DomainError, EigensolverError, HypothesisError, ModelFormatError
from .experiments import (ExperimentReport, coefficient_smoothing_experiment, dichotomy_experiment,
                          mc_rate_experiment, psd_contrast_experiment, run_experiment,
                          synthesis_experiment, uniform_bound_experiment)
from .kernels import (BaseKernel, GramMatrix, LiftedKernel, assemble_gram, eval_base_kernel,
                      eval_lifted_kernel_mc, eval_lifted_kernel_quadrature, eval_ridge_atom,
                      greedy_eps_net, psd_check, ridge_features, rkhs_norm_atomic,
                      volumetric_covering_bound)
from .measures import (CoefficientFn, Estimate, ParamMeasure, derive_child_seed, eval_coefficient,
                       l2_norm_of_coefficient, quadrature_rule, sample_params)
from .networks import (NetworkModel, assemble_features, build_network, evaluate_f_c, load_model,
                       neuron_activation, predict, save_model, set_unbiased_weights, train_ridge)
from .params import ParamBatch, RidgeParam
from .random_kernels import (RandomKernel, draw_kernel_state, eval_random_kernel,
                             mean_kernel_check, pathwise_indefiniteness_probe)
from .synthesis import (ConicKernel, SynthesisReport, conic_from_measure, nnls_fit,
                        synthesis_gap_report)

__version__ = "0.1.0"

__all__ = [
    "assemble_features", "assemble_gram", "BACKEND", "BaseKernel", "build_network",
    "coefficient_smoothing_experiment", "CoefficientFn", "ConfigError", "conic_from_measure",
    "ConicKernel", "derive_child_seed", "dichotomy_experiment", "DomainError",
    "draw_kernel_state", "EigensolverError", "Estimate", "eval_base_kernel", "eval_coefficient",
    "eval_lifted_kernel_mc", "eval_lifted_kernel_quadrature", "eval_random_kernel",
    "eval_ridge_atom", "evaluate_f_c", "ExperimentConfig", "ExperimentReport", "GramMatrix",
    "greedy_eps_net", "HypothesisError", "l2_norm_of_coefficient", "LiftedKernel", "load_config",
    "load_model", "mc_rate_experiment", "mean_kernel_check", "ModelFormatError", "NetworkModel",
    "neuron_activation", "nnls_fit", "ParamBatch", "ParamMeasure", "parse_config",
    "pathwise_indefiniteness_probe", "predict", "psd_check", "psd_contrast_experiment",
    "quadrature_rule", "RandomKernel", "ridge_features", "RidgeParam", "rkhs_norm_atomic",
    "run_experiment", "sample_params", "save_model", "set_unbiased_weights",
    "synthesis_experiment", "synthesis_gap_report", "SynthesisReport", "train_ridge",
    "uniform_bound_experiment", "volumetric_covering_bound",
]
