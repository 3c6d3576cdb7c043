"""Closed-loop sub-scores and score aggregations."""

from .exceptions import MetricsContractError
from .scores import (
    ExtendedSubScores,
    HumanMask,
    SubScores,
    ego_consistency,
    epdms,
    extended_comfort,
    human_mask,
    pdms,
    subscores,
)

__all__ = [
    "ExtendedSubScores",
    "HumanMask",
    "MetricsContractError",
    "SubScores",
    "ego_consistency",
    "epdms",
    "extended_comfort",
    "human_mask",
    "pdms",
    "subscores",
]
