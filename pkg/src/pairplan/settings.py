"""Settings for pairplan."""

import hashlib
import json
from pathlib import Path
import tomllib
from typing import Literal, Self

from pydantic import BaseModel, Field, ValidationError, model_validator

from .const import (
    BETA_MAX,
    BETA_MIN,
    CLOSING_SPEED_FLOOR,
    DEFAULT_A_MAX,
    DEFAULT_AGENT_HALF_EXTENTS,
    DEFAULT_BEST_OF_N,
    DEFAULT_CLIP_EPS,
    DEFAULT_DT,
    DEFAULT_EGO_HALF_EXTENTS,
    DEFAULT_FEATURE_DIM,
    DEFAULT_GRID_CELL,
    DEFAULT_GRID_CELLS,
    DEFAULT_GRID_ORIGIN,
    DEFAULT_GROUP_SIZE,
    DEFAULT_HEADS,
    DEFAULT_HORIZON,
    DEFAULT_J_MAX,
    DEFAULT_LANE_HALF_WIDTH,
    DEFAULT_LANE_WIDTH,
    DEFAULT_SCENE_TOKENS,
    DEFAULT_SPEED_LIMIT,
    DEFAULT_TOKEN_DIM,
    DEFAULT_TTC_THRESHOLD,
    DEFAULT_V_MAX,
    EC_DISTANCE_SCALE,
    LOG_STD_FLOOR,
    PROGRESS_FLOOR,
)
from .exceptions import ConfigurationError, PairPlanIOError

Family = Literal["StraightFollow", "LeadBrake", "LaneChange", "Turn", "RedLight"]
AgentName = Literal[
    "human", "il_only", "il_rwm", "pair_drive", "pair_drive_bestof6", "human_pair_drive"
]
ALL_FAMILIES: tuple[Family, ...] = (
    "StraightFollow",
    "LeadBrake",
    "LaneChange",
    "Turn",
    "RedLight",
)


class SimulatorConfig(BaseModel):
    """World and kinematics settings."""

    horizon: int = Field(
        description="Number of planned steps T", default=DEFAULT_HORIZON, ge=2
    )
    dt: float = Field(description="Step duration in seconds", default=DEFAULT_DT, gt=0)
    v_max: float = Field(
        description="Kinematic bound on speed, limits waypoint spacing to v_max*dt",
        default=DEFAULT_V_MAX,
        gt=0,
    )
    speed_limit: float = Field(
        description="Road speed limit used for scenario speeds and offset bounds",
        default=DEFAULT_SPEED_LIMIT,
        gt=0,
    )
    grid_cell: float = Field(
        description="Drivable grid cell size in meters", default=DEFAULT_GRID_CELL, gt=0
    )
    grid_cells: int = Field(
        description="Drivable grid width and height in cells",
        default=DEFAULT_GRID_CELLS,
        gt=0,
    )
    grid_origin: tuple[float, float] = Field(
        description="World position of the grid's lower-left corner",
        default=DEFAULT_GRID_ORIGIN,
    )
    ego_half_extents: tuple[float, float] = Field(
        description="Ego footprint half length and half width",
        default=DEFAULT_EGO_HALF_EXTENTS,
    )
    agent_half_extents: tuple[float, float] = Field(
        description="Default agent footprint half length and half width",
        default=DEFAULT_AGENT_HALF_EXTENTS,
    )
    lane_width: float = Field(
        description="Lane width used by the scenario generator",
        default=DEFAULT_LANE_WIDTH,
        gt=0,
    )
    closing_speed_floor: float = Field(
        description="Lower bound on closing speed in the TTC quotient",
        default=CLOSING_SPEED_FLOOR,
        gt=0,
    )


class MetricsConfig(BaseModel):
    """Sub-score thresholds."""

    ttc_threshold: float = Field(
        description="Minimum time to collision in seconds",
        default=DEFAULT_TTC_THRESHOLD,
    )
    a_max: float = Field(
        description="Comfort bound on |longitudinal acceleration|",
        default=DEFAULT_A_MAX,
    )
    j_max: float = Field(description="Comfort bound on |jerk|", default=DEFAULT_J_MAX)
    lane_half_width: float = Field(
        description="Allowed lateral deviation from the route for lane keeping",
        default=DEFAULT_LANE_HALF_WIDTH,
    )
    progress_floor: float = Field(
        description="Floor on the reference progress denominator",
        default=PROGRESS_FLOOR,
        gt=0,
    )
    ec_distance_scale: float = Field(
        description="Mean point distance between consecutive plans that zeroes EC",
        default=EC_DISTANCE_SCALE,
        gt=0,
    )


class NetConfig(BaseModel):
    """Network dimensions."""

    token_dim: int = Field(
        description="Token width d of the sampler", default=DEFAULT_TOKEN_DIM, gt=0
    )
    feature_dim: int = Field(
        description="Scene feature dimension D", default=DEFAULT_FEATURE_DIM, gt=0
    )
    heads: int = Field(description="Attention heads", default=DEFAULT_HEADS, gt=0)
    scene_tokens: int = Field(
        description="Number of scene tokens the cross-attention reads",
        default=DEFAULT_SCENE_TOKENS,
        gt=0,
    )
    hidden_dim: int = Field(
        description="Hidden width of the IL and RWM dense stacks", default=256, gt=0
    )
    feature_pool: int = Field(
        description="Pooled raster resolution per side for scene features",
        default=8,
        gt=0,
    )
    init_scale: float = Field(
        description="Std of the Gaussian weight initialisation, scaled by fan-in",
        default=1.0,
        ge=0,
    )


class OffsetBoundsConfig(BaseModel):
    """Per-intention offset boxes."""

    dy_max: float = Field(
        description="Lateral offset range per step for Left/Right", default=1.0, gt=0
    )
    dh_max: float = Field(
        description="Heading offset range per step for Left/Right", default=0.15, gt=0
    )
    dx_max_factor: float = Field(
        description="dx upper bound as a multiple of speed_limit*dt", default=1.2, gt=0
    )
    keep_half_width: float = Field(
        description="Half width of the Keep box on dx and dy", default=0.2, gt=0
    )
    keep_heading_half_width: float = Field(
        description="Half width of the Keep box on dh", default=0.05, gt=0
    )
    min_width: float = Field(
        description="Smallest allowed box width on any axis", default=0.05, gt=0
    )


class SamplerConfig(BaseModel):
    """Tree sampler settings."""

    intentions: list[str] = Field(
        description="Intention labels, fixed per checkpoint",
        default=["Keep", "Left", "Right", "Accelerate", "Decelerate"],
        min_length=1,
    )
    stage_stride: int = Field(
        description="Steps per expansion stage", default=2, gt=0
    )
    keep_k: int | None = Field(
        description="Leaves kept after each stage, defaults to the group size",
        default=None,
    )
    sampling: Literal["tree", "flat"] = Field(
        description="Tree expansion with pruning, or independent intention paths",
        default="tree",
    )
    log_std_init: float = Field(
        description="Initial latent log-std of the offset distributions",
        default=-0.7,
    )
    log_std_floor: float = Field(
        description="Floor on the latent log-std", default=LOG_STD_FLOOR
    )
    bounds: OffsetBoundsConfig = Field(
        description="Offset boxes", default_factory=OffsetBoundsConfig
    )


class OptimConfig(BaseModel):
    """AdamW settings."""

    lr: float = Field(description="Peak learning rate", default=1e-4, ge=0)
    weight_decay: float = Field(description="Decoupled weight decay", default=0.01, ge=0)
    schedule: Literal["constant", "cosine"] = Field(
        description="Learning rate schedule", default="constant"
    )
    min_lr: float = Field(description="Cosine floor", default=0.0, ge=0)


class IlConfig(BaseModel):
    """Imitation branch training."""

    epochs: int = Field(description="Passes over the suite", default=50, gt=0)
    steps: int | None = Field(
        description="Optimizer steps, overrides epochs when set", default=None
    )
    batch_size: int = Field(description="Scenarios per step", default=16, gt=0)
    optim: OptimConfig = Field(
        description="Optimizer", default_factory=lambda: OptimConfig(lr=1e-4)
    )


class GrpoConfig(BaseModel):
    """Group relative policy optimisation."""

    group_size: int = Field(
        description="Group size G", default=DEFAULT_GROUP_SIZE, ge=2
    )
    clip_eps: float = Field(
        description="Clip range epsilon", default=DEFAULT_CLIP_EPS, gt=0, lt=1
    )
    beta_init: float = Field(description="Initial KL weight", default=0.04, gt=0)
    kl_target: float = Field(description="Target KL per update", default=0.02, gt=0)
    kl_tolerance: float = Field(
        description="Band factor around the KL target", default=1.5, gt=1
    )
    beta_factor: float = Field(
        description="Multiplicative beta adaptation step", default=2.0, gt=1
    )
    beta_min: float = Field(description="Lower beta clamp", default=BETA_MIN, gt=0)
    beta_max: float = Field(description="Upper beta clamp", default=BETA_MAX, gt=0)
    updates: int = Field(description="Number of policy updates", default=200, gt=0)
    batch_size: int = Field(description="Scenarios per update", default=4, gt=0)
    inner_epochs: int = Field(
        description="Optimisation passes per sampled batch", default=2, gt=0
    )
    optim: OptimConfig = Field(
        description="Optimizer",
        default_factory=lambda: OptimConfig(lr=3e-4, weight_decay=0.0, schedule="cosine"),
    )

    @model_validator(mode="after")
    def _check_beta_clamp(self) -> Self:
        if self.beta_min >= self.beta_max:
            raise ValueError(f"beta_min {self.beta_min} must be below beta_max {self.beta_max}")
        return self


class RwmConfig(BaseModel):
    """Reward world model training and use."""

    epochs: int = Field(description="Training epochs", default=100, gt=0)
    batch_size: int = Field(description="Samples per step", default=64, gt=0)
    holdout_fraction: float = Field(
        description="Fraction of scenarios held out for confidence targets",
        default=0.2,
        ge=0,
        lt=1,
    )
    groups_per_scenario: int = Field(
        description="Sampled groups per scenario used as training inputs",
        default=1,
        gt=0,
    )
    selection_policy: Literal["reward", "confidence_weighted"] = Field(
        description="How plan selection ranks candidates", default="reward"
    )
    optim: OptimConfig = Field(
        description="Optimizer",
        default_factory=lambda: OptimConfig(lr=1e-3, weight_decay=0.0),
    )


class SuiteConfig(BaseModel):
    """Scenario suite generation."""

    families: list[Family] = Field(
        description="Scenario families", default=list(ALL_FAMILIES)
    )
    per_family: int = Field(description="Scenarios per family", default=40, gt=0)
    corrupted_fraction: float = Field(
        description="Fraction of scenarios whose expert is corrupted",
        default=0.3,
        ge=0,
        le=1,
    )


class CheckpointPaths(BaseModel):
    """Checkpoint locations."""

    il: Path | None = Field(description="IL checkpoint", default=None)
    rl: Path | None = Field(description="Sampler checkpoint", default=None)
    rwm: Path | None = Field(description="Reward world model checkpoint", default=None)


class EvalConfig(BaseModel):
    """Evaluation harness."""

    roster: list[AgentName] = Field(
        description="Agents to evaluate",
        default=["human", "il_only", "pair_drive", "pair_drive_bestof6"],
    )
    best_of_n: int = Field(
        description="Sampling passes for best-of-N agents", default=DEFAULT_BEST_OF_N, gt=0
    )
    record_timing: bool = Field(
        description="Fill wall_time_ms; off keeps reports byte-reproducible",
        default=False,
    )
    svg: bool = Field(description="Write the mean score bar chart", default=True)
    bootstrap_resamples: int = Field(
        description="Resamples for the paired bootstrap interval", default=2000, gt=0
    )


class ExperimentConfig(BaseModel):
    """Everything one run needs."""

    suite_path: Path = Field(description="Scenario suite directory", default=Path("suite"))
    seed: int = Field(description="Master seed", default=0)
    simulator: SimulatorConfig = Field(default_factory=SimulatorConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    net: NetConfig = Field(default_factory=NetConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    il: IlConfig = Field(default_factory=IlConfig)
    grpo: GrpoConfig = Field(default_factory=GrpoConfig)
    rwm: RwmConfig = Field(default_factory=RwmConfig)
    suite: SuiteConfig = Field(default_factory=SuiteConfig)
    checkpoints: CheckpointPaths = Field(default_factory=CheckpointPaths)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @classmethod
    def from_file(cls, path: Path | str) -> "ExperimentConfig":
        """Load a config from a TOML or JSON file."""
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as err:
            raise PairPlanIOError("Cannot read config", path) from err
        try:
            if path.suffix == ".toml":
                return cls.model_validate(tomllib.loads(raw.decode("utf-8")))
            if path.suffix == ".json":
                return cls.model_validate_json(raw)
        except (ValidationError, tomllib.TOMLDecodeError) as err:
            raise ConfigurationError(f"Invalid config {path}: {err}") from err
        raise ConfigurationError(f"Unsupported config suffix {path.suffix!r}")

    def digest(self) -> str:
        """SHA-256 of the canonical JSON dump, used as report provenance."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
