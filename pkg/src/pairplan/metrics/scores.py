"""Closed-loop sub-scores and the PDMS / EPDMS aggregations."""

from collections.abc import Iterable
from dataclasses import asdict, dataclass, fields
import logging
import math
from typing import TYPE_CHECKING, Self

import numpy as np

from pairplan.geometry import Trajectory, normalize_heading
from pairplan.settings import MetricsConfig

from .exceptions import MetricsContractError

if TYPE_CHECKING:
    from pairplan.sim import Scenario, SimulationTrace

log = logging.getLogger(__name__)

PDMS_WEIGHTS = {"ep": 5.0, "ttc": 5.0, "comfort": 2.0}
EPDMS_WEIGHTS = {"ep": 5.0, "ttc": 5.0, "lk": 2.0, "hc": 2.0, "ec": 2.0}


@dataclass(frozen=True)
class SubScores:
    """NC and DAC penalties plus the EP, TTC and comfort terms.

    Values may be fractional when they are means over a suite.
    """

    nc: float
    dac: float
    ep: float
    ttc: float
    comfort: float

    def __post_init__(self) -> None:
        """Reject values outside [0, 1]."""
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise MetricsContractError(f"Sub-score {f.name}={value} outside [0, 1]")
            object.__setattr__(self, f.name, float(value))

    def as_dict(self) -> dict[str, float]:
        """Field name to value."""
        return asdict(self)


@dataclass(frozen=True)
class ExtendedSubScores(SubScores):
    """Sub-scores with the extended penalties and terms."""

    ddc: float = 1.0
    tlc: float = 1.0
    lk: float = 1.0
    hc: float = 1.0
    ec: float = 1.0

    @classmethod
    def mean(cls, scores: Iterable["ExtendedSubScores"]) -> Self:
        """Field-wise mean, used for report aggregates."""
        rows = [s.as_dict() for s in scores]
        if not rows:
            raise MetricsContractError("Cannot average an empty set of sub-scores")
        return cls(**{k: float(np.mean([r[k] for r in rows])) for k in rows[0]})


@dataclass(frozen=True)
class HumanMask:
    """Multiplicative penalties the human expert already fails on a scenario."""

    nc: bool = False
    dac: bool = False
    ddc: bool = False
    tlc: bool = False


def human_mask(expert_scores: ExtendedSubScores) -> HumanMask:
    """Mask every multiplicative penalty on which the expert scores zero."""
    return HumanMask(
        nc=expert_scores.nc == 0.0,
        dac=expert_scores.dac == 0.0,
        ddc=expert_scores.ddc == 0.0,
        tlc=expert_scores.tlc == 0.0,
    )


def _comfortable(accel: np.ndarray, jerk: np.ndarray, config: MetricsConfig) -> bool:
    return bool(np.all(np.abs(accel) <= config.a_max) and np.all(np.abs(jerk) <= config.j_max))


def extended_comfort(trace: "SimulationTrace", config: MetricsConfig) -> float:
    """Comfort including the jerk against the pre-plan acceleration."""
    jerk = trace.jerk.copy()
    jerk[1] = trace.history_jerk
    return float(_comfortable(trace.accel, jerk, config))


def ego_consistency(
    plan: Trajectory, previous_plan: Trajectory | None, config: MetricsConfig
) -> float:
    """One minus the normalised mean point distance between consecutive plans."""
    if previous_plan is None:
        return 1.0
    a, b = plan.points[:, :2], previous_plan.points[:, :2]
    n = min(a.shape[0], b.shape[0])
    distance = float(np.mean(np.hypot(*(a[:n] - b[:n]).T)))
    return float(np.clip(1.0 - distance / config.ec_distance_scale, 0.0, 1.0))


def subscores(
    trace: "SimulationTrace",
    scenario: "Scenario",
    reference_progress: float,
    config: MetricsConfig | None = None,
    previous_plan: Trajectory | None = None,
) -> ExtendedSubScores:
    """Score a rollout.

    A non-positive reference progress falls back to the progress floor.
    """
    config = config or MetricsConfig()
    if reference_progress <= 0:
        log.debug("Reference progress %.3f floored for %s", reference_progress, scenario.id)
    denominator = max(reference_progress, config.progress_floor)
    heading_error = normalize_heading(trace.ego_poses[:, 2] - trace.route_tangent)

    tlc = 1.0
    light = scenario.traffic_light
    if light is not None and trace.stop_line_crossing is not None:
        tlc = 0.0 if light.is_red(trace.stop_line_crossing) else 1.0

    plan = Trajectory(trace.ego_poses, dt=trace.dt)
    return ExtendedSubScores(
        nc=0.0 if trace.collision.any() else 1.0,
        dac=0.0 if trace.off_drivable.any() else 1.0,
        ep=float(np.clip(trace.progress / denominator, 0.0, 1.0)),
        ttc=1.0 if trace.min_ttc >= config.ttc_threshold else 0.0,
        comfort=float(_comfortable(trace.accel, trace.jerk, config)),
        ddc=0.0 if np.any(np.abs(heading_error) > math.pi / 2) else 1.0,
        tlc=tlc,
        lk=float(np.mean(trace.lateral_deviation <= config.lane_half_width)),
        hc=extended_comfort(trace, config),
        ec=ego_consistency(plan, previous_plan, config),
    )


def pdms(s: SubScores) -> float:
    """NC * DAC * (5 EP + 5 TTC + 2 C) / 12."""
    weighted = sum(w * getattr(s, k) for k, w in PDMS_WEIGHTS.items())
    return s.nc * s.dac * weighted / sum(PDMS_WEIGHTS.values())


def epdms(s: ExtendedSubScores, mask: HumanMask | None = None) -> float:
    """NC * DAC * DDC * TLC * (5 EP + 5 TTC + 2 LK + 2 HC + 2 EC) / 16.

    Penalties the human mask marks are replaced by 1.
    """
    mask = mask or HumanMask()
    penalty = 1.0
    for name in ("nc", "dac", "ddc", "tlc"):
        penalty *= 1.0 if getattr(mask, name) else getattr(s, name)
    weighted = sum(w * getattr(s, k) for k, w in EPDMS_WEIGHTS.items())
    return penalty * weighted / sum(EPDMS_WEIGHTS.values())
