"""Minimal numpy function approximators with hand-written reverse mode."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .exceptions import CheckpointFormatError, ContractViolation, ShapeError
from .gradcheck import GradCheckReport, finite_diff_check
from .layers import (
    attention_backward,
    attention_forward,
    dense_backward,
    dense_forward,
    gelu,
    layer_norm_backward,
    layer_norm_forward,
    softmax,
)
from .network import ForwardCache, Sequential
from .optim import OptimizerState, adamw_step
from .params import (
    GradientSet,
    LayerSpec,
    Manifest,
    ParameterSet,
    attention,
    dense,
    embedding,
    layer_norm,
)

__all__ = [
    "Checkpoint",
    "CheckpointFormatError",
    "ContractViolation",
    "ForwardCache",
    "GradCheckReport",
    "GradientSet",
    "LayerSpec",
    "Manifest",
    "OptimizerState",
    "ParameterSet",
    "Sequential",
    "ShapeError",
    "adamw_step",
    "attention",
    "attention_backward",
    "attention_forward",
    "dense",
    "dense_backward",
    "dense_forward",
    "embedding",
    "finite_diff_check",
    "gelu",
    "layer_norm",
    "layer_norm_backward",
    "layer_norm_forward",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
]
