"""Threshold and batch policies for dynamic two-sided matching markets with
impatient agents: analytics, fluid limits and event simulation."""
from .analytics import MarketParams, ThresholdSolution
from .utility_models import (CorrelatedPareto, Exponential, FrechetCrowding, Pareto, Uniform,
                             UtilityModel, parse_model)

__version__ = "0.1.0"

__all__ = ["MarketParams", "ThresholdSolution", "UtilityModel", "Exponential", "Uniform", "Pareto",
           "CorrelatedPareto", "FrechetCrowding", "parse_model"]
