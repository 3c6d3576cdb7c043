"""Imitation branch: single-shot waypoint regression trained with an L1 loss."""

from collections.abc import Sequence
from dataclasses import dataclass, field
import logging
import math
from typing import Any, Self

import numpy as np

from pairplan.const import DEFAULT_DT, POSITION_SCALE
from pairplan.exceptions import ConfigurationError
from pairplan.geometry import LengthMismatchError, Trajectory, normalize_heading
from pairplan.nn import (
    Checkpoint,
    GradientSet,
    Manifest,
    OptimizerState,
    ParameterSet,
    Sequential,
    ShapeError,
    adamw_step,
    dense,
)
from pairplan.settings import ExperimentConfig, NetConfig
from pairplan.sim import Scenario, encode_scene

log = logging.getLogger(__name__)

ROLE = "il"


def il_manifest(net: NetConfig, horizon: int) -> Manifest:
    """Dense GELU hidden layer followed by a linear head emitting 3T values."""
    return Manifest.of(
        [
            dense("il_hidden", net.feature_dim, net.hidden_dim, "gelu"),
            dense("il_out", net.hidden_dim, 3 * horizon),
        ]
    )


@dataclass
class ILPolicy:
    """IL parameters together with the horizon they decode to."""

    params: ParameterSet
    horizon: int
    dt: float = DEFAULT_DT
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(
        cls, net: NetConfig, horizon: int, dt: float = DEFAULT_DT, seed: int | None = 0
    ) -> Self:
        """Randomly initialised policy, or all-zero when seed is None."""
        manifest = il_manifest(net, horizon)
        if seed is None:
            params = ParameterSet.zeros(manifest)
        else:
            params = ParameterSet.initialize(manifest, np.random.default_rng(seed), net.init_scale)
        return cls(params, horizon, dt)

    @property
    def network(self) -> Sequential:
        """The dense stack."""
        return Sequential(self.params.manifest)

    @property
    def feature_dim(self) -> int:
        """Expected scene feature length."""
        return self.params.manifest.layer("il_hidden").shape("w")[0]

    def to_checkpoint(self, seed: int = 0, step: int = 0) -> Checkpoint:
        """Checkpoint with role tag "il"."""
        metadata = self.metadata | {"horizon": self.horizon, "dt": self.dt}
        return Checkpoint(ROLE, self.params, seed, step, metadata)

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> Self:
        """Rebuild a policy from a loaded checkpoint."""
        meta = dict(checkpoint.metadata)
        return cls(checkpoint.params, int(meta.pop("horizon")), float(meta.pop("dt")), meta)


def _decode(outputs: np.ndarray, horizon: int) -> np.ndarray:
    """Network outputs (B, 3T) to points (B, T+1, 3) with point 0 at the origin."""
    steps = outputs.reshape(outputs.shape[0], horizon, 3)
    points = np.zeros((outputs.shape[0], horizon + 1, 3))
    points[:, 1:, :2] = steps[..., :2] * POSITION_SCALE
    points[:, 1:, 2] = steps[..., 2]
    return points


def il_forward(policy: ILPolicy, features: np.ndarray) -> Trajectory:
    """Decode one trajectory of T+1 waypoints in the ego frame.

    Raises:
        ShapeError: If the feature length does not match the policy.

    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (policy.feature_dim,):
        raise ShapeError(f"IL expects {policy.feature_dim} features, got {features.shape}")
    outputs, _ = policy.network.forward(policy.params, features[None, :])
    return Trajectory(_decode(outputs, policy.horizon)[0], dt=policy.dt)


def _differences(pred: np.ndarray, human: np.ndarray) -> np.ndarray:
    diff = pred - human
    diff[..., 2] = normalize_heading(diff[..., 2])
    return diff


def il_loss(pred: Trajectory, human: Trajectory) -> float:
    """Mean absolute difference over all (T+1) x 3 coordinates, headings wrapped.

    Raises:
        LengthMismatchError: If the trajectories differ in length.

    """
    if len(pred) != len(human):
        raise LengthMismatchError(f"Cannot compare {len(pred)} with {len(human)} waypoints")
    return float(np.mean(np.abs(_differences(pred.points.copy(), human.points))))


def il_loss_grad(pred_points: np.ndarray, human_points: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch-mean L1 loss and its gradient with respect to the predicted points."""
    diff = _differences(np.array(pred_points, dtype=np.float64), human_points)
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def _loss_and_grads(
    policy: ILPolicy, params: ParameterSet, features: np.ndarray, targets: np.ndarray
) -> tuple[float, GradientSet]:
    network = policy.network
    outputs, cache = network.forward(params, features)
    loss, dpoints = il_loss_grad(_decode(outputs, policy.horizon), targets)
    doutputs = np.empty_like(outputs).reshape(outputs.shape[0], policy.horizon, 3)
    doutputs[..., :2] = dpoints[:, 1:, :2] * POSITION_SCALE
    doutputs[..., 2] = dpoints[:, 1:, 2]
    grads = network.backward(params, cache, doutputs.reshape(outputs.shape))
    return loss, grads


def train_il(
    suite: Sequence[Scenario],
    config: ExperimentConfig | None = None,
    seed: int | None = None,
) -> ILPolicy:
    """Fit the IL policy to the suite's demonstrations with AdamW.

    Raises:
        ConfigurationError: If the suite is empty.

    """
    if not suite:
        raise ConfigurationError("Cannot train the IL branch on an empty suite")
    config = config or ExperimentConfig()
    seed = config.seed if seed is None else seed
    horizon, dt = suite[0].horizon, suite[0].dt
    rng = np.random.default_rng(seed)
    policy = ILPolicy.create(config.net, horizon, dt, seed)

    features = np.stack([encode_scene(s, config.net) for s in suite])
    targets = np.stack([s.expert_trajectory.points for s in suite])
    batch = min(config.il.batch_size, len(suite))
    per_epoch = math.ceil(len(suite) / batch)
    total = config.il.steps or config.il.epochs * per_epoch
    state = OptimizerState.create(policy.params, config.il.optim, total)

    params = policy.params
    curve: list[float] = []
    epoch_losses: list[float] = []
    order = rng.permutation(len(suite))
    for step in range(total):
        position = step % per_epoch
        if position == 0 and step:
            order = rng.permutation(len(suite))
        idx = order[position * batch : (position + 1) * batch]
        loss, grads = _loss_and_grads(policy, params, features[idx], targets[idx])
        params, state = adamw_step(params, grads, state)
        epoch_losses.append(loss)
        if position == per_epoch - 1 or step == total - 1:
            curve.append(float(np.mean(epoch_losses)))
            log.info("IL epoch %d: loss %.4f", len(curve), curve[-1])
            epoch_losses = []

    final, _ = _loss_and_grads(policy, params, features, targets)
    log.info("IL training done after %d steps, final loss %.4f", total, final)
    return ILPolicy(
        params,
        horizon,
        dt,
        {"steps": total, "loss_curve": curve, "final_loss": final, "seed": seed},
    )
