"""Reward world model, plan selection and best-of-N."""

from .model import (
    ROLE,
    Labeler,
    RwmDataset,
    RwmModel,
    RwmOutput,
    build_dataset,
    rwm_forward,
    rwm_forward_batch,
    rwm_input,
    rwm_manifest,
    sigmoid,
    train_rwm,
)
from .select import (
    OracleScorer,
    RwmScorer,
    RwmValue,
    Scorer,
    SelectionPolicy,
    best_of_n,
    select_plan,
    selection_key,
)

__all__ = [
    "ROLE",
    "Labeler",
    "OracleScorer",
    "RwmDataset",
    "RwmModel",
    "RwmOutput",
    "RwmScorer",
    "RwmValue",
    "Scorer",
    "SelectionPolicy",
    "best_of_n",
    "build_dataset",
    "rwm_forward",
    "rwm_forward_batch",
    "rwm_input",
    "rwm_manifest",
    "select_plan",
    "selection_key",
    "sigmoid",
    "train_rwm",
]
