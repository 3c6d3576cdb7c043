"""Reward world model: a learned stand-in for simulator scoring."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
import logging
import math
from typing import Any, Self

import numpy as np

from pairplan.const import POSITION_SCALE
from pairplan.exceptions import ConfigurationError
from pairplan.geometry import DrivingCommand, Trajectory
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
from pairplan.parallel import ordered_map
from pairplan.sampler import SamplerPolicy, sample_group
from pairplan.settings import ExperimentConfig, NetConfig
from pairplan.sim import COMMANDS, Scenario, command_one_hot, encode_scene, trajectory_pdms

log = logging.getLogger(__name__)

ROLE = "rwm"

Labeler = Callable[[Scenario, Trajectory], float]


def rwm_manifest(net: NetConfig, horizon: int) -> Manifest:
    """Dense GELU trunk with two logits: reward and confidence."""
    n_in = net.feature_dim + len(COMMANDS) + 3 * (horizon + 1)
    return Manifest.of(
        [
            dense("rwm_hidden", n_in, net.hidden_dim, "gelu"),
            dense("rwm_out", net.hidden_dim, 2),
        ]
    )


@dataclass(frozen=True)
class RwmOutput:
    """Predicted reward and confidence, both in [0, 1]."""

    reward: float
    confidence: float

    def __post_init__(self) -> None:
        """Validate the bounds."""
        for name in ("reward", "confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ShapeError(f"RWM {name} {value} outside [0, 1]")


@dataclass
class RwmModel:
    """RWM parameters and the horizon they were built for."""

    params: ParameterSet
    horizon: int
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(cls, net: NetConfig, horizon: int, seed: int | None = 0) -> Self:
        """Randomly initialised model, or all-zero when seed is None."""
        manifest = rwm_manifest(net, horizon)
        if seed is None:
            return cls(ParameterSet.zeros(manifest), horizon)
        return cls(ParameterSet.initialize(manifest, np.random.default_rng(seed), net.init_scale), horizon)

    @property
    def network(self) -> Sequential:
        """The dense stack."""
        return Sequential(self.params.manifest)

    @property
    def input_dim(self) -> int:
        """Expected input width D + |commands| + 3(T+1)."""
        return self.network.input_dim()

    def to_checkpoint(self, seed: int = 0, step: int = 0) -> Checkpoint:
        """Checkpoint with role tag "rwm"."""
        return Checkpoint(ROLE, self.params, seed, step, self.metadata | {"horizon": self.horizon})

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> Self:
        """Rebuild a model from a loaded checkpoint."""
        meta = dict(checkpoint.metadata)
        return cls(checkpoint.params, int(meta.pop("horizon")), meta)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function, stable for large |z|."""
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def rwm_input(features: np.ndarray, command: DrivingCommand, trajectory: Trajectory) -> np.ndarray:
    """Concatenate scene features, the command one-hot and the scaled trajectory."""
    points = trajectory.points.copy()
    points[:, :2] /= POSITION_SCALE
    return np.concatenate([np.asarray(features, dtype=np.float64), command_one_hot(command), points.ravel()])


def _predict(model: RwmModel, inputs: np.ndarray) -> np.ndarray:
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ShapeError(f"RWM expects inputs of width {model.input_dim}, got {inputs.shape}")
    logits, _ = model.network.forward(model.params, inputs)
    return sigmoid(logits)


def rwm_forward(
    model: RwmModel, features: np.ndarray, command: DrivingCommand, trajectory: Trajectory
) -> RwmOutput:
    """Score one trajectory.

    Raises:
        ShapeError: If the input width does not match the model.

    """
    if trajectory.horizon != model.horizon:
        raise ShapeError(f"RWM expects horizon {model.horizon}, got {trajectory.horizon}")
    out = _predict(model, rwm_input(features, command, trajectory)[None, :])[0]
    return RwmOutput(float(out[0]), float(out[1]))


def rwm_forward_batch(
    model: RwmModel,
    features: np.ndarray,
    command: DrivingCommand,
    trajectories: Sequence[Trajectory],
) -> list[RwmOutput]:
    """Score several trajectories of one scene in a single pass."""
    if not trajectories:
        return []
    inputs = np.stack([rwm_input(features, command, t) for t in trajectories])
    return [RwmOutput(float(r), float(c)) for r, c in _predict(model, inputs)]


@dataclass(frozen=True)
class RwmDataset:
    """Inputs and labels, split by scenario into a fit and a held-out fold."""

    inputs: np.ndarray
    labels: np.ndarray
    heldout: np.ndarray


def build_dataset(
    suite: Sequence[Scenario],
    policy: SamplerPolicy,
    config: ExperimentConfig,
    seed: int,
    labeler: Labeler | None = None,
) -> RwmDataset:
    """Sample groups around every expert and label each member."""
    labeler = labeler or (lambda s, t: trajectory_pdms(s, t, config.metrics))
    rng = np.random.default_rng(seed)
    n_heldout = math.floor(config.rwm.holdout_fraction * len(suite))
    heldout_ids = set(rng.permutation(len(suite))[:n_heldout].tolist())
    group_size = config.grpo.group_size

    pairs: list[tuple[Scenario, Trajectory]] = []
    inputs: list[np.ndarray] = []
    heldout: list[bool] = []
    for idx, scenario in enumerate(suite):
        features = encode_scene(scenario, config.net)
        reference = scenario.expert_trajectory
        for g in range(config.rwm.groups_per_scenario):
            group_rng = np.random.default_rng(np.random.SeedSequence([seed, idx, g]))
            members = sample_group(policy, reference, features, group_size, group_rng)
            for member in members:
                pairs.append((scenario, member.trajectory))
                inputs.append(rwm_input(features, scenario.command, member.trajectory))
                heldout.append(idx in heldout_ids)
    labels = ordered_map(lambda pair: labeler(*pair), pairs)
    return RwmDataset(np.stack(inputs), np.asarray(labels, dtype=np.float64), np.asarray(heldout))


def _head_grads(
    model: RwmModel, params: ParameterSet, inputs: np.ndarray, targets: np.ndarray, head: int
) -> tuple[float, GradientSet]:
    """Mean squared error of one squashed head and its parameter gradient."""
    network = model.network
    logits, cache = network.forward(params, inputs)
    out = sigmoid(logits[:, head])
    err = out - targets
    dlogits = np.zeros_like(logits)
    dlogits[:, head] = 2.0 * err * out * (1.0 - out) / inputs.shape[0]
    return float(np.mean(err**2)), network.backward(params, cache, dlogits)


def _fit(
    model: RwmModel,
    params: ParameterSet,
    inputs: np.ndarray,
    targets: np.ndarray,
    head: int,
    config: ExperimentConfig,
    rng: np.random.Generator,
    frozen_trunk: bool,
) -> tuple[ParameterSet, list[float]]:
    batch = min(config.rwm.batch_size, inputs.shape[0])
    per_epoch = math.ceil(inputs.shape[0] / batch)
    optim = config.rwm.optim.model_copy(update={"weight_decay": 0.0}) if frozen_trunk else config.rwm.optim
    state = OptimizerState.create(params, optim, config.rwm.epochs * per_epoch)
    curve: list[float] = []
    for epoch in range(config.rwm.epochs):
        order = rng.permutation(inputs.shape[0])
        losses = []
        for start in range(0, inputs.shape[0], batch):
            idx = order[start : start + batch]
            loss, grads = _head_grads(model, params, inputs[idx], targets[idx], head)
            if frozen_trunk:
                masked = GradientSet.like(params)
                masked.view("rwm_out", "w")[:, head] = grads.view("rwm_out", "w")[:, head]
                masked.view("rwm_out", "b")[head] = grads.view("rwm_out", "b")[head]
                grads = masked
            params, state = adamw_step(params, grads, state)
            losses.append(loss)
        curve.append(float(np.mean(losses)))
        log.debug("RWM head %d epoch %d: loss %.5f", head, epoch, curve[-1])
    return params, curve


def train_rwm(
    suite: Sequence[Scenario],
    policy: SamplerPolicy,
    config: ExperimentConfig | None = None,
    seed: int | None = None,
    labeler: Labeler | None = None,
) -> RwmModel:
    """Regress simulator rewards, then fit confidence on a held-out fold.

    The reward head is fitted on the training scenarios. The confidence head
    is then fitted, with the trunk frozen, to 1 - |reward error| on the
    held-out scenarios; without a held-out fold it uses the training fold.

    Raises:
        ConfigurationError: If the suite is empty.

    """
    if not suite:
        raise ConfigurationError("Cannot train the reward world model on an empty suite")
    config = config or ExperimentConfig()
    seed = config.seed if seed is None else seed
    data = build_dataset(suite, policy, config, seed, labeler)
    fit = ~data.heldout if np.any(~data.heldout) else np.ones_like(data.heldout)
    probe = data.heldout if np.any(data.heldout) else fit
    if not np.any(data.heldout):
        log.warning("No held-out scenarios, confidence is fitted on the training fold")

    model = RwmModel.create(config.net, suite[0].horizon, seed)
    rng = np.random.default_rng(seed)
    params, curve = _fit(model, model.params, data.inputs[fit], data.labels[fit], 0, config, rng, False)
    model = RwmModel(params, model.horizon)

    predicted = _predict(model, data.inputs[probe])[:, 0]
    errors = np.abs(predicted - data.labels[probe])
    params, confidence_curve = _fit(
        model, params, data.inputs[probe], 1.0 - errors, 1, config, rng, True
    )
    mae = float(np.mean(errors))
    log.info(
        "RWM trained on %d samples, held-out MAE %.4f, final loss %.5f",
        int(fit.sum()),
        mae,
        curve[-1],
    )
    return RwmModel(
        params,
        model.horizon,
        {
            "seed": seed,
            "samples": int(data.labels.shape[0]),
            "loss_curve": curve,
            "confidence_curve": confidence_curve,
            "heldout_mae": mae,
        },
    )
