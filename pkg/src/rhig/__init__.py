"""Receding horizon inexact gradient for smoothed online convex optimization with noisy predictions."""

from .algos import AlgoConfig, RunTrace, afhc_run, chc_run, rhgd_run, rhig_run
from .bounds import (BoundConstants, corollary1_bound, corollary2_bound, corollary3_bound,
                     theorem1_bound, theorem3_lower, theorem5_bound, theorem6_K, variation_VT)
from .core import CostSpec, FeasibleSet, InstanceError, project, quadratic_tracking_cost
from .offline import OfflineSolution, offline_optimum, partial_gradient, total_cost
from .predict import (PredictionTable, StochasticPredictionModel, ar1_scenario, delta,
                      expected_error_bound, generate)

__version__ = "0.1.0"
