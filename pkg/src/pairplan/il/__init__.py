"""Imitation branch: single-shot waypoint regression."""

from .model import ILPolicy, il_forward, il_loss, il_loss_grad, il_manifest, train_il

__all__ = [
    "ILPolicy",
    "il_forward",
    "il_loss",
    "il_loss_grad",
    "il_manifest",
    "train_il",
]
