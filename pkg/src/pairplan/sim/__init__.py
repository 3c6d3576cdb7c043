"""Synthetic closed-loop world: scenarios, the rule expert and rollouts."""

from .exceptions import FeatureLayoutError, ScenarioError
from .features import COMMANDS, FeatureLayout, command_one_hot, encode_scene
from .generator import (
    build_suite,
    generate_scenario,
    load_suite,
    save_suite,
    synthesize_expert,
)
from .rollout import SimulationTrace, check_collision, min_ttc, rollout
from .scoring import evaluate_trajectory, trajectory_pdms
from .scenario import (
    AgentSpec,
    Corruption,
    DrivableGrid,
    EgoState,
    Route,
    Scenario,
    TrafficLight,
)

__all__ = [
    "COMMANDS",
    "AgentSpec",
    "Corruption",
    "DrivableGrid",
    "EgoState",
    "FeatureLayout",
    "FeatureLayoutError",
    "Route",
    "Scenario",
    "ScenarioError",
    "SimulationTrace",
    "TrafficLight",
    "build_suite",
    "check_collision",
    "command_one_hot",
    "encode_scene",
    "evaluate_trajectory",
    "generate_scenario",
    "load_suite",
    "min_ttc",
    "rollout",
    "save_suite",
    "synthesize_expert",
    "trajectory_pdms",
]
