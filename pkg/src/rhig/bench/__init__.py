"""Scenarios, the Monte Carlo runner and the command line interface."""

from .runner import AlgoSpec, RegretReport, run_experiment, run_seed, summarize, write_csv
from .scenarios import (Instance, Scenario, scenario_lowerbound, scenario_planning,
                        scenario_quadrotor)

__all__ = ["AlgoSpec", "RegretReport", "run_experiment", "run_seed", "summarize", "write_csv",
           "Instance", "Scenario", "scenario_lowerbound", "scenario_planning",
           "scenario_quadrotor"]
