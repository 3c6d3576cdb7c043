"""AdamW with decoupled weight decay and an optional cosine schedule."""

from dataclasses import dataclass, replace
import logging
import math
from typing import Literal, Self

import numpy as np

from pairplan.const import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from pairplan.settings import OptimConfig

from .exceptions import ShapeError
from .params import GradientSet, ParameterSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerState:
    """Moments, step counter and the learning-rate schedule."""

    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    weight_decay: float
    schedule: Literal["constant", "cosine"] = "constant"
    total_steps: int = 1
    min_lr: float = 0.0
    skipped: int = 0

    @classmethod
    def create(cls, params: ParameterSet, config: OptimConfig, total_steps: int = 1) -> Self:
        """Fresh state with zero moments."""
        return cls(
            m=np.zeros(len(params)),
            v=np.zeros(len(params)),
            step=0,
            lr=config.lr,
            weight_decay=config.weight_decay,
            schedule=config.schedule,
            total_steps=max(total_steps, 1),
            min_lr=config.min_lr,
        )

    def learning_rate(self) -> float:
        """Rate applied by the next step."""
        if self.schedule == "constant":
            return self.lr
        progress = min(self.step, self.total_steps) / self.total_steps
        return self.min_lr + 0.5 * (self.lr - self.min_lr) * (1.0 + math.cos(math.pi * progress))


def adamw_step(
    params: ParameterSet, grads: GradientSet, state: OptimizerState
) -> tuple[ParameterSet, OptimizerState]:
    """One AdamW update; a non-finite gradient skips the update.

    Raises:
        ShapeError: If gradient, moments and parameters are not aligned.

    """
    if grads.values.shape[0] != len(params) or state.m.shape[0] != len(params):
        raise ShapeError(
            f"Gradient ({grads.values.shape[0]}) and moments ({state.m.shape[0]}) "
            f"do not match {len(params)} parameters"
        )
    if not grads.is_finite():
        log.warning("Skipping update at step %d: non-finite gradient", state.step)
        return params, replace(state, skipped=state.skipped + 1)

    lr = state.learning_rate()
    t = state.step + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads.values
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grads.values**2
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    theta = params.values
    updated = theta - lr * state.weight_decay * theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    log.debug("AdamW step %d lr=%.3g grad_norm=%.4g", t, lr, grads.norm())
    return params.replace(updated), replace(state, m=m, v=v, step=t)
