"""Group relative policy optimisation of the tree sampler."""

from .exceptions import NumericalError
from .objective import (
    Advantages,
    GroupSample,
    ObjectiveResult,
    clipped_surrogate,
    group_advantage,
    grpo_objective,
    kl_estimate,
    kl_terms,
    surrogate_is_clipped,
    update_beta,
)
from .trainer import LOG_COLUMNS, collect_group, train_rl, write_training_log

__all__ = [
    "LOG_COLUMNS",
    "Advantages",
    "GroupSample",
    "NumericalError",
    "ObjectiveResult",
    "clipped_surrogate",
    "collect_group",
    "group_advantage",
    "grpo_objective",
    "kl_estimate",
    "kl_terms",
    "surrogate_is_clipped",
    "train_rl",
    "update_beta",
    "write_training_log",
]
