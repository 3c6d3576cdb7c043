"""Tree-structured trajectory sampler of the RL branch."""

from .bounds import intention_boxes, squash, unsquash, validate_intentions
from .exceptions import SamplerError
from .group import (
    GroupMember,
    group_capacity,
    max_group_size,
    member_log_prob,
    recover_latents,
    sample_group,
    traj_log_prob,
    traj_log_prob_grad,
)
from .policy import (
    ROLE,
    SamplerPolicy,
    StepDistribution,
    sampler_manifest,
    sampler_step,
    slot_features,
)
from .tree import expand_tree, prune, stage_lengths
from .value import LeafValue, PrefixRolloutValue, extend_with_reference

__all__ = [
    "ROLE",
    "GroupMember",
    "LeafValue",
    "PrefixRolloutValue",
    "SamplerError",
    "SamplerPolicy",
    "StepDistribution",
    "expand_tree",
    "extend_with_reference",
    "group_capacity",
    "intention_boxes",
    "max_group_size",
    "member_log_prob",
    "prune",
    "recover_latents",
    "sample_group",
    "sampler_manifest",
    "sampler_step",
    "slot_features",
    "squash",
    "stage_lengths",
    "traj_log_prob",
    "traj_log_prob_grad",
    "unsquash",
    "validate_intentions",
]
