"""Bayesian reconstruction of vehicle/pedestrian collisions and the
probability that obeying the speed limit would have prevented them."""

from .counterfactual import (
    CounterfactualReport,
    ReductionEstimate,
    accident_reduction,
    build_report,
    counterfactual_impact_speed,
    deterministic_method1,
    prob_speeding,
    probability_of_necessity,
)
from .model import (
    Case,
    InjuryParams,
    KinematicState,
    ThrowParams,
    case_log_likelihood,
    collision_outcome,
    impact_speed,
    severity_probs,
    theoretical_skid_s1,
    theoretical_skid_s2,
)
from .oracle import GridConfig, calibration_experiment, grid_posterior, simulate_case
from .priors import PriorSpec, default_priors, prior_log_density, sample_prior
from .sampler import McmcConfig, Posterior, psrf, run_chain, run_inference, summarize

__version__ = "0.1.0"
