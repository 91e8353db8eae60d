"""Bounds on posterior expectations over a set of priors.

Iterative importance sampling with Metropolis draws, for the Bayesian
random-effects meta-analysis model.
"""
from ._backend import NAME as BACKEND
from .errors import (AccuracyError, DegenerateSeriesError, EmptyOverlapError, EmptySetError,
                     InitializationError, InputError, RobustIISError, StuckError)
from .iis import IISConfig, IISReport, flat_prior_reference, iterate_lower_bound
from .isampling import (WeightedSample, combined_ess, ess_is, g_tilde_series,
                        importance_log_weights, self_normalized_estimate, standard_error)
from .mcmc import Chain, MCMCConfig, MetropolisSampler, autocorrelation, ess_mcmc, run_chain
from .model import (Dataset, Hyperparameters, ModelConstants, ParameterState,
                    log_unnormalized_posterior, prior_predictive_sample)
from .optimize import (AnnealingConfig, OptimizationResult, anneal_minimize, grid_minimize,
                       make_objective, objective)
from .oracle import (ABCCoefficients, QuadratureSpec, abc_coefficients, lemma1_integral,
                     lemma2_integral, posterior_mean_mu)
from .prior_set import ElicitationSpec, PriorSet, build_prior_set, contains, coverage_proportion

__version__ = "0.1.0"
