"""Scenario files, sweeps, exponent fits and the command line."""

from .fitting import FitError, FitResult, compare_fit, fit_exponents
from .scenario import Scenario, ScenarioError, load_scenario
from .sweep import SweepResult, compare, run_and_report, run_sweep

__all__ = [
    "FitError", "FitResult", "compare_fit", "fit_exponents",
    "Scenario", "ScenarioError", "load_scenario",
    "SweepResult", "compare", "run_and_report", "run_sweep",
]
