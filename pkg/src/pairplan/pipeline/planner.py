"""Inference pipeline: IL proposal, tree sampling around it, RWM selection."""

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Self

import numpy as np

from pairplan.exceptions import ConfigurationError
from pairplan.geometry import Trajectory
from pairplan.il import ILPolicy, il_forward
from pairplan.il.model import ROLE as IL_ROLE
from pairplan.nn import load_checkpoint
from pairplan.rwm import (
    OracleScorer,
    RwmModel,
    RwmScorer,
    RwmValue,
    SelectionPolicy,
    best_of_n,
    select_plan,
)
from pairplan.rwm.model import ROLE as RWM_ROLE
from pairplan.sampler import ROLE as RL_ROLE
from pairplan.sampler import SamplerPolicy, max_group_size, sample_group
from pairplan.settings import ExperimentConfig
from pairplan.sim import Scenario, encode_scene

log = logging.getLogger(__name__)


@dataclass
class Models:
    """Trained networks an evaluation may need; any of them may be absent."""

    il: ILPolicy | None = None
    sampler: SamplerPolicy | None = None
    rwm: RwmModel | None = None

    @classmethod
    def load(cls, config: ExperimentConfig, need: set[str]) -> Self:
        """Load the checkpoints named in the config.

        Raises:
            ConfigurationError: If a needed checkpoint path is not configured.

        """
        paths = config.checkpoints
        missing = sorted(role for role in need if getattr(paths, role) is None)
        if missing:
            raise ConfigurationError(f"Missing checkpoint paths for {', '.join(missing)}")
        models = cls()
        if "il" in need:
            models.il = ILPolicy.from_checkpoint(load_checkpoint(Path(paths.il), IL_ROLE))
        if "rl" in need:
            models.sampler = SamplerPolicy.from_checkpoint(load_checkpoint(Path(paths.rl), RL_ROLE))
        if "rwm" in need:
            models.rwm = RwmModel.from_checkpoint(load_checkpoint(Path(paths.rwm), RWM_ROLE))
        return models


def plan(
    scenario: Scenario,
    il: ILPolicy,
    sampler: SamplerPolicy,
    rwm: RwmModel | None,
    n_bestof: int = 1,
    config: ExperimentConfig | None = None,
    seed: int = 0,
    root: Trajectory | None = None,
    scorer: RwmScorer | OracleScorer | None = None,
) -> Trajectory:
    """Plan one scenario.

    The IL trajectory (or `root`, when given) anchors the tree; candidates
    are scored by the RWM unless another scorer is injected, filtered against
    the anchor and the best survivor wins. With n_bestof > 1 the sampling is
    repeated with independent seeds and the best plan across passes is kept.

    Raises:
        ConfigurationError: If neither an RWM nor a scorer is available.

    """
    config = config or ExperimentConfig()
    if scorer is None:
        if rwm is None:
            raise ConfigurationError("Planning needs an RWM checkpoint or an injected scorer")
    features = encode_scene(scenario, config.net)
    il_traj = il_forward(il, features)
    anchor = il_traj if root is None else root
    group_size = max_group_size(sampler, config.grpo.group_size)
    if group_size < 2:
        log.debug("Sampler cannot fill a group for %s, keeping the anchor", scenario.id)
        return anchor
    scorer = scorer or RwmScorer(rwm, features, scenario.command)
    selection: SelectionPolicy = config.rwm.selection_policy
    anchor_score = scorer(anchor)

    plans = []
    for k in range(max(n_bestof, 1)):
        rng = np.random.default_rng(np.random.SeedSequence([seed, scenario.seed, k]))
        members = sample_group(
            sampler, anchor, features, group_size, rng, RwmValue(scorer, anchor)
        )
        trajectories = [m.trajectory for m in members]
        candidates = list(zip(trajectories, scorer.score_many(trajectories), strict=True))
        plans.append(select_plan(anchor, candidates, anchor_score, selection))
    chosen = plans[0] if len(plans) == 1 else best_of_n(plans, scorer, selection)
    log.debug("Planned %s over %d passes", scenario.id, len(plans))
    return chosen
