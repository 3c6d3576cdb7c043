"""Parallel imitation and reinforcement trajectory planning."""

from .exceptions import ConfigurationError, PairPlanError, PairPlanIOError
from .pipeline import Models, plan, run_eval
from .settings import ExperimentConfig

__all__ = [
    "ConfigurationError",
    "ExperimentConfig",
    "Models",
    "PairPlanError",
    "PairPlanIOError",
    "plan",
    "run_eval",
]
