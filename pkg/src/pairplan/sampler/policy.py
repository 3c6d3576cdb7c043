"""Attention-based offset policy of the tree sampler.

Trajectory slots and intention embeddings form one token sequence. A pre-norm
self-attention block mixes them, a pre-norm cross-attention block reads the
scene tokens, and two heads on the intention rows give the latent offset mean
and the intention logit.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Any, Self

import numpy as np

from pairplan.const import DEFAULT_DT, DEFAULT_SPEED_LIMIT, POSITION_SCALE
from pairplan.geometry import Trajectory
from pairplan.nn import (
    Checkpoint,
    ContractViolation,
    GradientSet,
    Manifest,
    ParameterSet,
    ShapeError,
    attention,
    attention_backward,
    attention_forward,
    dense,
    dense_backward,
    dense_forward,
    embedding,
    layer_norm,
    layer_norm_backward,
    layer_norm_forward,
)
from pairplan.settings import NetConfig, OffsetBoundsConfig, SamplerConfig

from .bounds import intention_boxes, squash, validate_intentions

log = logging.getLogger(__name__)

ROLE = "rl"
SLOT_FEATURES = 6
HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)


def sampler_manifest(net: NetConfig, intentions: int) -> Manifest:
    """Layers of the sampler network."""
    d = net.token_dim
    return Manifest.of(
        [
            dense("traj_enc", SLOT_FEATURES, d, "gelu"),
            dense("scene_enc", net.feature_dim, net.scene_tokens * d),
            embedding("intention_emb", intentions, d),
            layer_norm("ln_self", d),
            attention("self_attn", d, net.heads),
            layer_norm("ln_cross", d),
            attention("cross_attn", d, net.heads, cross=True),
            dense("offset_head", d, 3),
            dense("score_head", d, 1),
            embedding("log_std", intentions, 3),
        ]
    )


@dataclass
class SamplerPolicy:
    """Sampler parameters plus the settings that shape their outputs."""

    params: ParameterSet
    intentions: tuple[str, ...]
    horizon: int
    dt: float = DEFAULT_DT
    speed_limit: float = DEFAULT_SPEED_LIMIT
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        net: NetConfig,
        sampler: SamplerConfig,
        horizon: int,
        dt: float = DEFAULT_DT,
        speed_limit: float = DEFAULT_SPEED_LIMIT,
        seed: int | None = 0,
    ) -> Self:
        """Randomly initialised policy, or all-zero when seed is None."""
        validate_intentions(sampler.intentions)
        manifest = sampler_manifest(net, len(sampler.intentions))
        if seed is None:
            params = ParameterSet.zeros(manifest)
        else:
            params = ParameterSet.initialize(manifest, np.random.default_rng(seed), net.init_scale)
            table = manifest.slice("log_std", "table")[0]
            values = params.values.copy()
            values[table] = 0.0
            params = params.replace(values)
        return cls(params, tuple(sampler.intentions), horizon, dt, speed_limit, sampler)

    def with_params(self, params: ParameterSet) -> Self:
        """Same policy settings, other parameters."""
        return type(self)(
            params, self.intentions, self.horizon, self.dt, self.speed_limit, self.sampler, dict(self.metadata)
        )

    @property
    def heads(self) -> int:
        """Attention head count."""
        return self.params.manifest.layer("self_attn").heads

    @property
    def feature_dim(self) -> int:
        """Expected scene feature length."""
        return self.params.manifest.layer("scene_enc").shape("w")[0]

    @property
    def bounds(self) -> OffsetBoundsConfig:
        """Offset box settings."""
        return self.sampler.bounds

    def to_checkpoint(self, seed: int = 0, step: int = 0) -> Checkpoint:
        """Checkpoint with role tag "rl"."""
        metadata = self.metadata | {
            "intentions": list(self.intentions),
            "horizon": self.horizon,
            "dt": self.dt,
            "speed_limit": self.speed_limit,
            "sampler": self.sampler.model_dump(mode="json"),
        }
        return Checkpoint(ROLE, self.params, seed, step, metadata)

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> Self:
        """Rebuild a policy from a loaded checkpoint."""
        meta = dict(checkpoint.metadata)
        return cls(
            checkpoint.params,
            tuple(meta.pop("intentions")),
            int(meta.pop("horizon")),
            float(meta.pop("dt")),
            float(meta.pop("speed_limit")),
            SamplerConfig.model_validate(meta.pop("sampler")),
            meta,
        )


def slot_features(prefix: np.ndarray, reference: Trajectory) -> np.ndarray:
    """Per-slot inputs (x/s, y/s, h, filled, k/T, is_current) over T+1 slots.

    Slots up to the branch depth hold the branch, later slots the reference.
    """
    horizon = reference.horizon
    depth = prefix.shape[0] - 1
    points = reference.points.copy()
    points[: depth + 1] = prefix
    slots = np.zeros((horizon + 1, SLOT_FEATURES))
    slots[:, :2] = points[:, :2] / POSITION_SCALE
    slots[:, 2] = points[:, 2]
    slots[: depth + 1, 3] = 1.0
    slots[:, 4] = np.arange(horizon + 1) / horizon
    slots[depth, 5] = 1.0
    return slots


@dataclass(frozen=True)
class NetworkCache:
    token: int
    caches: dict[str, Any]
    slots: int


def network_forward(
    params: ParameterSet, slots: np.ndarray, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray, NetworkCache]:
    """Latent offset means (N, 3) and intention logits (N,)."""
    feature_dim = params.manifest.layer("scene_enc").shape("w")[0]
    if features.shape != (feature_dim,):
        raise ShapeError(f"Sampler expects {feature_dim} scene features, got {features.shape}")
    p = params.view
    heads = params.manifest.layer("self_attn").heads
    d = p("traj_enc", "w").shape[1]
    traj_tokens, c_traj = dense_forward(p("traj_enc", "w"), p("traj_enc", "b"), slots, "gelu")
    scene_flat, c_scene = dense_forward(p("scene_enc", "w"), p("scene_enc", "b"), features[None, :])
    scene_tokens = scene_flat.reshape(-1, d)

    x0 = np.concatenate([traj_tokens, p("intention_emb", "table")])
    n1, c_ln1 = layer_norm_forward(p("ln_self", "gamma"), p("ln_self", "beta"), x0)
    a1, c_sa = attention_forward(*(p("self_attn", t) for t in ("wq", "wk", "wv", "wo")), n1, n1, heads)
    x1 = x0 + a1
    n2, c_ln2 = layer_norm_forward(p("ln_cross", "gamma"), p("ln_cross", "beta"), x1)
    a2, c_ca = attention_forward(
        *(p("cross_attn", t) for t in ("wq", "wk", "wv", "wo")), n2, scene_tokens, heads
    )
    x2 = x1 + a2
    rows = x2[slots.shape[0] :]
    latent_mean, c_off = dense_forward(p("offset_head", "w"), p("offset_head", "b"), rows)
    logits, c_score = dense_forward(p("score_head", "w"), p("score_head", "b"), rows)
    cache = NetworkCache(
        params.token,
        {
            "traj": c_traj,
            "scene": c_scene,
            "ln_self": c_ln1,
            "self_attn": c_sa,
            "ln_cross": c_ln2,
            "cross_attn": c_ca,
            "offset": c_off,
            "score": c_score,
        },
        slots.shape[0],
    )
    return latent_mean, logits[:, 0], cache


def network_backward(
    params: ParameterSet,
    cache: NetworkCache,
    d_latent_mean: np.ndarray,
    d_logits: np.ndarray,
    grads: GradientSet,
) -> GradientSet:
    """Accumulate parameter gradients of the network outputs into grads."""
    if cache.token != params.token:
        raise ContractViolation("Sampler cache is stale for these parameters")
    p = params.view
    c = cache.caches
    d_rows, dw, db = dense_backward(p("offset_head", "w"), c["offset"], d_latent_mean)
    grads.accumulate("offset_head", "w", dw)
    grads.accumulate("offset_head", "b", db)
    d_score_rows, dw, db = dense_backward(p("score_head", "w"), c["score"], d_logits[:, None])
    grads.accumulate("score_head", "w", dw)
    grads.accumulate("score_head", "b", db)

    width = p("traj_enc", "w").shape[1]
    dx2 = np.zeros((cache.slots + d_rows.shape[0], width))
    dx2[cache.slots :] = d_rows + d_score_rows

    dn2, d_scene_tokens, weights = attention_backward(
        *(p("cross_attn", t) for t in ("wq", "wk", "wv", "wo")), c["cross_attn"], dx2
    )
    for tensor, g in weights.items():
        grads.accumulate("cross_attn", tensor, g)
    dx_ln2, dgamma, dbeta = layer_norm_backward(c["ln_cross"], dn2)
    grads.accumulate("ln_cross", "gamma", dgamma)
    grads.accumulate("ln_cross", "beta", dbeta)
    dx1 = dx2 + dx_ln2

    dn1_q, dn1_kv, weights = attention_backward(
        *(p("self_attn", t) for t in ("wq", "wk", "wv", "wo")), c["self_attn"], dx1
    )
    for tensor, g in weights.items():
        grads.accumulate("self_attn", tensor, g)
    dx_ln1, dgamma, dbeta = layer_norm_backward(c["ln_self"], dn1_q + dn1_kv)
    grads.accumulate("ln_self", "gamma", dgamma)
    grads.accumulate("ln_self", "beta", dbeta)
    dx0 = dx1 + dx_ln1

    grads.accumulate("intention_emb", "table", dx0[cache.slots :])
    _, dw, db = dense_backward(p("traj_enc", "w"), c["traj"], dx0[: cache.slots])
    grads.accumulate("traj_enc", "w", dw)
    grads.accumulate("traj_enc", "b", db)
    _, dw, db = dense_backward(p("scene_enc", "w"), c["scene"], d_scene_tokens.reshape(1, -1))
    grads.accumulate("scene_enc", "w", dw)
    grads.accumulate("scene_enc", "b", db)
    return grads


@dataclass(frozen=True)
class StepDistribution:
    """Per-intention offset distributions for one step of one branch."""

    latent_mean: np.ndarray
    log_std: np.ndarray
    log_prior: np.ndarray
    low: np.ndarray
    high: np.ndarray
    clamped: np.ndarray
    cache: NetworkCache

    @property
    def mean_offsets(self) -> np.ndarray:
        """Offsets at the latent means, inside the boxes."""
        return squash(self.latent_mean, self.low, self.high)

    @property
    def prior(self) -> np.ndarray:
        """Intention probabilities."""
        return np.exp(self.log_prior)

    def offset(self, intention: int, latent: np.ndarray) -> np.ndarray:
        """Squashed offset of a latent draw for one intention."""
        return squash(latent, self.low[intention], self.high[intention])

    def log_density(self, intention: int, latent: np.ndarray) -> float:
        """Diagonal Gaussian log-density of a latent draw."""
        std = np.exp(self.log_std[intention])
        z = (latent - self.latent_mean[intention]) / std
        return float(np.sum(-0.5 * z**2 - self.log_std[intention] - HALF_LOG_TWO_PI))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - math.log(float(np.sum(np.exp(shifted))))


def sampler_step(
    policy: SamplerPolicy,
    prefix: np.ndarray,
    reference: Trajectory,
    features: np.ndarray,
) -> StepDistribution:
    """Offset distributions for the step after the branch `prefix` (depth+1, 3).

    Raises:
        ShapeError: On a feature dimension mismatch or a prefix at the horizon.

    """
    depth = prefix.shape[0] - 1
    if depth >= reference.horizon:
        raise ShapeError(f"Branch of depth {depth} is already at the horizon")
    latent_mean, logits, cache = network_forward(
        policy.params, slot_features(prefix, reference), np.asarray(features, dtype=np.float64)
    )
    raw_log_std = policy.sampler.log_std_init + policy.params.view("log_std", "table")
    floor = policy.sampler.log_std_floor
    low, high = intention_boxes(
        reference.steps()[depth], policy.intentions, policy.bounds, policy.speed_limit, policy.dt
    )
    return StepDistribution(
        latent_mean=latent_mean,
        log_std=np.maximum(raw_log_std, floor),
        log_prior=_log_softmax(logits),
        low=low,
        high=high,
        clamped=raw_log_std < floor,
        cache=cache,
    )


def step_backward(
    policy: SamplerPolicy,
    dist: StepDistribution,
    d_latent_mean: np.ndarray,
    d_log_std: np.ndarray,
    d_log_prior: np.ndarray,
    grads: GradientSet,
) -> GradientSet:
    """Accumulate parameter gradients of a step's distribution outputs."""
    prior = dist.prior
    d_logits = d_log_prior - prior * np.sum(d_log_prior)
    grads.accumulate("log_std", "table", np.where(dist.clamped, 0.0, d_log_std))
    return network_backward(policy.params, dist.cache, d_latent_mean, d_logits, grads)


def log_density_grads(dist: StepDistribution, intention: int, latent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of log_density with respect to the latent mean and log-std rows."""
    d_mean = np.zeros_like(dist.latent_mean)
    d_log_std = np.zeros_like(dist.log_std)
    std = np.exp(dist.log_std[intention])
    z = (latent - dist.latent_mean[intention]) / std
    d_mean[intention] = z / std
    d_log_std[intention] = z**2 - 1.0
    return d_mean, d_log_std
